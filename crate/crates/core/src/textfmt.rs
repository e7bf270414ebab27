//! Float formatting shared by the flat text snapshot/checkpoint formats.

/// 17 significant digits: enough to round-trip any f64 exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
