//! The Ordeal grid-world: an overworld connected to two caves, one holding
//! a sword and the other a duck that walks toward you. Touching the duck
//! with the sword wins (+1 on top of the sword's +1); without it, -1.
//! Episodes end on contact, on Quit, or at the 500-step cap.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::obs::{Observation, HEIGHT, WIDTH};

/// Hard episode length cap.
pub const STEP_CAP: u32 = 500;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("episode is finished; call reset")]
    EpisodeFinished,
    #[error("layout integrity: {0}")]
    LayoutIntegrity(String),
    #[error("layout parse error at line {line}: {message}")]
    LayoutParse { line: usize, message: String },
}

/// The 8 tile kinds; the discriminant is the observation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Tile {
    Empty = 0,
    Wall = 1,
    Agent = 2,
    Sword = 3,
    Duck = 4,
    CaveDoorA = 5,
    CaveDoorB = 6,
    Snow = 7,
}

impl Tile {
    pub fn channel(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Room {
    Overworld = 0,
    CaveA = 1,
    CaveB = 2,
}

impl Room {
    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Room::Overworld => "overworld",
            Room::CaveA => "cave_a",
            Room::CaveB => "cave_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Quit = 4,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Quit];

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> Option<(i32, i32)> {
        match self {
            Action::Up => Some((-1, 0)),
            Action::Down => Some((1, 0)),
            Action::Left => Some((0, -1)),
            Action::Right => Some((0, 1)),
            Action::Quit => None,
        }
    }
}

/// One environment step's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub extrinsic: f64,
    pub done: bool,
    /// Set when `done` came from the step cap rather than a terminal event.
    /// Value bootstrapping treats such cuts as non-terminal.
    pub truncated: bool,
}

/// Anything the training harness can drive. Lets tests swap in stub worlds.
pub trait Environment {
    fn reset(&mut self, seed: u64) -> StepResult;
    fn step(&mut self, action: Action) -> Result<StepResult, EnvError>;
}

type Pos = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
struct RoomGrid {
    rows: usize,
    cols: usize,
    tiles: Vec<Tile>,
}

impl RoomGrid {
    fn get(&self, r: i32, c: i32) -> Tile {
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            Tile::Wall
        } else {
            self.tiles[r as usize * self.cols + c as usize]
        }
    }
}

/// Static level geometry: three rooms plus object and door positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    rooms: [RoomGrid; 3],
    start: Pos,
    sword_home: Pos,
    duck_home: Pos,
    /// Door positions: [overworld A, cave A side, overworld B, cave B side].
    doors: [Pos; 4],
}

impl Layout {
    /// Parses the plain-text three-block layout format.
    pub fn parse(text: &str) -> Result<Layout, EnvError> {
        let err = |line: usize, message: String| EnvError::LayoutParse { line, message };
        let mut blocks: [Vec<(usize, &str)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut current: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            match line {
                "[overworld]" => current = Some(0),
                "[cave_a]" => current = Some(1),
                "[cave_b]" => current = Some(2),
                _ if line.starts_with('[') => {
                    return Err(err(line_no, format!("unknown room header `{line}`")));
                }
                _ => match current {
                    Some(b) => blocks[b].push((line_no, line)),
                    None => return Err(err(line_no, "map row before any room header".into())),
                },
            }
        }

        let mut rooms = Vec::with_capacity(3);
        let mut start = None;
        let mut sword_home = None;
        let mut duck_home = None;
        let mut doors: [Option<Pos>; 4] = [None; 4];
        for (b, block) in blocks.iter().enumerate() {
            let room_name = ["overworld", "cave_a", "cave_b"][b];
            if block.is_empty() {
                return Err(err(0, format!("missing room block [{room_name}]")));
            }
            let cols = block[0].1.chars().count();
            let mut tiles = Vec::with_capacity(block.len() * cols);
            for (r, &(line_no, row)) in block.iter().enumerate() {
                if row.chars().count() != cols {
                    return Err(err(line_no, format!("ragged row in [{room_name}]")));
                }
                for (c, ch) in row.chars().enumerate() {
                    let unique = |slot: &mut Option<Pos>, what: &str| {
                        if slot.is_some() {
                            return Err(err(line_no, format!("duplicate {what} in [{room_name}]")));
                        }
                        *slot = Some((r, c));
                        Ok(())
                    };
                    let tile = match ch {
                        '.' => Tile::Empty,
                        '#' => Tile::Wall,
                        '~' => Tile::Snow,
                        '@' => {
                            if b != 0 {
                                return Err(err(line_no, "agent start `@` must be in the overworld".into()));
                            }
                            unique(&mut start, "agent start `@`")?;
                            Tile::Empty
                        }
                        'S' => {
                            if b != 1 {
                                return Err(err(line_no, "sword `S` must be in [cave_a]".into()));
                            }
                            unique(&mut sword_home, "sword `S`")?;
                            Tile::Empty
                        }
                        'D' => {
                            if b != 2 {
                                return Err(err(line_no, "duck `D` must be in [cave_b]".into()));
                            }
                            unique(&mut duck_home, "duck `D`")?;
                            Tile::Empty
                        }
                        'A' => {
                            let slot = match b {
                                0 => &mut doors[0],
                                1 => &mut doors[1],
                                _ => return Err(err(line_no, "door `A` not allowed in [cave_b]".into())),
                            };
                            unique(slot, "door `A`")?;
                            Tile::CaveDoorA
                        }
                        'B' => {
                            let slot = match b {
                                0 => &mut doors[2],
                                2 => &mut doors[3],
                                _ => return Err(err(line_no, "door `B` not allowed in [cave_a]".into())),
                            };
                            unique(slot, "door `B`")?;
                            Tile::CaveDoorB
                        }
                        other => return Err(err(line_no, format!("unknown tile character `{other}`"))),
                    };
                    tiles.push(tile);
                }
            }
            rooms.push(RoomGrid { rows: block.len(), cols, tiles });
        }

        let missing = |what: &str| EnvError::LayoutIntegrity(format!("missing {what}"));
        let layout = Layout {
            rooms: match <[RoomGrid; 3]>::try_from(rooms) {
                Ok(r) => r,
                Err(_) => unreachable!("exactly three blocks"),
            },
            start: start.ok_or_else(|| missing("agent start `@` in [overworld]"))?,
            sword_home: sword_home.ok_or_else(|| missing("sword `S` in [cave_a]"))?,
            duck_home: duck_home.ok_or_else(|| missing("duck `D` in [cave_b]"))?,
            doors: [
                doors[0].ok_or_else(|| missing("door `A` in [overworld]"))?,
                doors[1].ok_or_else(|| missing("door `A` in [cave_a]"))?,
                doors[2].ok_or_else(|| missing("door `B` in [overworld]"))?,
                doors[3].ok_or_else(|| missing("door `B` in [cave_b]"))?,
            ],
        };
        Ok(layout)
    }

    /// The layout compiled into the binary and shipped under `data/`.
    pub fn default_layout() -> Layout {
        Layout::parse(include_str!("../data/ordeal_default.txt")).expect("bundled layout parses")
    }

    /// Where a door move lands: the paired door tile in the linked room.
    fn door_exit(&self, door: Tile, from_room: Room) -> (Room, Pos) {
        match (door, from_room) {
            (Tile::CaveDoorA, Room::Overworld) => (Room::CaveA, self.doors[1]),
            (Tile::CaveDoorA, Room::CaveA) => (Room::Overworld, self.doors[0]),
            (Tile::CaveDoorB, Room::Overworld) => (Room::CaveB, self.doors[3]),
            (Tile::CaveDoorB, Room::CaveB) => (Room::Overworld, self.doors[2]),
            _ => unreachable!("door tiles only exist in their linked rooms"),
        }
    }
}

/// The mutable episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub room: Room,
    pub agent_pos: Pos,
    pub has_sword: bool,
    pub duck_pos: Pos,
    pub duck_alive: bool,
    pub step_count: u32,
    pub done: bool,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdealEnv {
    layout: Layout,
    state: WorldState,
}

impl OrdealEnv {
    pub fn new(layout: Layout) -> OrdealEnv {
        let state = WorldState {
            room: Room::Overworld,
            agent_pos: layout.start,
            has_sword: false,
            duck_pos: layout.duck_home,
            duck_alive: true,
            step_count: 0,
            done: false,
            score: 0,
        };
        OrdealEnv { layout, state }
    }

    pub fn with_default_layout() -> OrdealEnv {
        OrdealEnv::new(Layout::default_layout())
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Renders the 5x5 egocentric one-hot observation. Cells outside the
    /// current room render as Wall; the center cell is always Agent.
    pub fn observe(&self) -> Observation {
        let grid = &self.layout.rooms[self.state.room.index()];
        let (ar, ac) = self.state.agent_pos;
        let mut cells = [[0usize; WIDTH]; HEIGHT];
        for (wr, row) in cells.iter_mut().enumerate() {
            for (wc, cell) in row.iter_mut().enumerate() {
                let r = ar as i32 + wr as i32 - (HEIGHT as i32 / 2);
                let c = ac as i32 + wc as i32 - (WIDTH as i32 / 2);
                let tile = if (r, c) == (ar as i32, ac as i32) {
                    Tile::Agent
                } else if self.state.room == Room::CaveB
                    && self.state.duck_alive
                    && (r, c) == (self.state.duck_pos.0 as i32, self.state.duck_pos.1 as i32)
                {
                    Tile::Duck
                } else if self.state.room == Room::CaveA
                    && !self.state.has_sword
                    && (r, c) == (self.layout.sword_home.0 as i32, self.layout.sword_home.1 as i32)
                {
                    Tile::Sword
                } else {
                    grid.get(r, c)
                };
                *cell = tile.channel();
            }
        }
        Observation::from_channels(&cells)
    }

    fn duck_step(&mut self) {
        let (ar, ac) = (self.state.agent_pos.0 as i32, self.state.agent_pos.1 as i32);
        let (dr_pos, dc_pos) = (self.state.duck_pos.0 as i32, self.state.duck_pos.1 as i32);
        let (dr, dc) = (ar - dr_pos, ac - dc_pos);
        if dr == 0 && dc == 0 {
            return;
        }
        let vertical = (dr.signum(), 0);
        let horizontal = (0, dc.signum());
        // Larger gap first; vertical wins ties.
        let prefs = if dr.abs() >= dc.abs() { [vertical, horizontal] } else { [horizontal, vertical] };
        let grid = &self.layout.rooms[Room::CaveB.index()];
        for (mr, mc) in prefs {
            if (mr, mc) == (0, 0) {
                continue;
            }
            let (nr, nc) = (dr_pos + mr, dc_pos + mc);
            if (nr, nc) == (ar, ac) {
                self.state.duck_pos = (nr as usize, nc as usize);
                return;
            }
            if matches!(grid.get(nr, nc), Tile::Empty | Tile::Snow) {
                self.state.duck_pos = (nr as usize, nc as usize);
                return;
            }
        }
    }

    fn duck_contact(&mut self) -> f64 {
        self.state.duck_alive = false;
        self.state.done = true;
        if self.state.has_sword {
            1.0
        } else {
            -1.0
        }
    }

    /// ASCII view of the current room with the agent, duck and sword
    /// overlaid, for trajectory traces.
    pub fn render_ascii(&self) -> String {
        let grid = &self.layout.rooms[self.state.room.index()];
        let mut out = String::new();
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let ch = if (r, c) == self.state.agent_pos {
                    '@'
                } else if self.state.room == Room::CaveB && self.state.duck_alive && (r, c) == self.state.duck_pos {
                    'D'
                } else if self.state.room == Room::CaveA
                    && !self.state.has_sword
                    && (r, c) == self.layout.sword_home
                {
                    'S'
                } else {
                    match grid.tiles[r * grid.cols + c] {
                        Tile::Empty => '.',
                        Tile::Wall => '#',
                        Tile::Snow => '~',
                        Tile::CaveDoorA => 'A',
                        Tile::CaveDoorB => 'B',
                        Tile::Agent | Tile::Sword | Tile::Duck => '.',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

impl Environment for OrdealEnv {
    /// Puts the world back to its fixed initial configuration. The layout is
    /// deterministic, so the seed is accepted only for interface uniformity.
    fn reset(&mut self, _seed: u64) -> StepResult {
        self.state = OrdealEnv::new(self.layout.clone()).state;
        StepResult { obs: self.observe(), extrinsic: 0.0, done: false, truncated: false }
    }

    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.state.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.state.step_count += 1;
        let mut reward = 0.0;

        match action.delta() {
            None => {
                self.state.done = true;
            }
            Some((mr, mc)) => {
                let (r, c) = (self.state.agent_pos.0 as i32 + mr, self.state.agent_pos.1 as i32 + mc);
                let grid = &self.layout.rooms[self.state.room.index()];
                let target = grid.get(r, c);
                let target_pos = (r.max(0) as usize, c.max(0) as usize);
                let duck_here = self.state.room == Room::CaveB
                    && self.state.duck_alive
                    && r >= 0
                    && c >= 0
                    && target_pos == self.state.duck_pos;
                if duck_here {
                    self.state.agent_pos = target_pos;
                    reward += self.duck_contact();
                } else {
                    match target {
                        Tile::Wall => {}
                        Tile::CaveDoorA | Tile::CaveDoorB => {
                            let (room, pos) = self.layout.door_exit(target, self.state.room);
                            self.state.room = room;
                            self.state.agent_pos = pos;
                        }
                        _ => {
                            self.state.agent_pos = target_pos;
                            if self.state.room == Room::CaveA
                                && !self.state.has_sword
                                && target_pos == self.layout.sword_home
                            {
                                self.state.has_sword = true;
                                reward += 1.0;
                            }
                        }
                    }
                }
            }
        }

        // The duck closes in only while the agent shares cave B with it.
        if !self.state.done && self.state.room == Room::CaveB && self.state.duck_alive {
            self.duck_step();
            if self.state.duck_pos == self.state.agent_pos {
                reward += self.duck_contact();
            }
        }

        let mut truncated = false;
        if !self.state.done && self.state.step_count >= STEP_CAP {
            self.state.done = true;
            truncated = true;
        }
        self.state.score += reward as i64;
        Ok(StepResult { obs: self.observe(), extrinsic: reward, done: self.state.done, truncated })
    }
}

/// Node identity for search: step count and score are excluded, which is
/// sound because every reachable configuration sits well under the cap and
/// the running score is determined by `has_sword` outside terminal states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct SearchKey {
    room: Room,
    agent_pos: Pos,
    has_sword: bool,
    duck_pos: Pos,
    duck_alive: bool,
}

impl SearchKey {
    fn of(state: &WorldState) -> SearchKey {
        SearchKey {
            room: state.room,
            agent_pos: state.agent_pos,
            has_sword: state.has_sword,
            duck_pos: state.duck_pos,
            duck_alive: state.duck_alive,
        }
    }
}

/// Breadth-first search for a plan that scores 2 (sword, then duck).
/// Fails with a layout-integrity error when no such plan exists.
pub fn bfs_solve(env: &OrdealEnv) -> Result<Vec<Action>, EnvError> {
    let mut fresh = env.clone();
    fresh.reset(0);
    let mut queue = VecDeque::new();
    let mut parents: HashMap<SearchKey, (SearchKey, Action)> = HashMap::new();
    let start_key = SearchKey::of(fresh.state());
    queue.push_back(fresh.clone());
    while let Some(node) = queue.pop_front() {
        for action in Action::ALL {
            let mut next = node.clone();
            let result = next.step(action).expect("search never steps a finished node");
            let key = SearchKey::of(next.state());
            if result.done {
                if next.state().score == 2 {
                    // Reconstruct the action path.
                    let mut plan = vec![action];
                    let mut cursor = SearchKey::of(node.state());
                    while cursor != start_key {
                        let (prev, a) = parents[&cursor];
                        plan.push(a);
                        cursor = prev;
                    }
                    plan.reverse();
                    return Ok(plan);
                }
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = parents.entry(key) {
                e.insert((SearchKey::of(node.state()), action));
                queue.push_back(next);
            }
        }
    }
    Err(EnvError::LayoutIntegrity("no action sequence reaches a score of 2".into()))
}
