//! Command wire protocol, pivot-turn differential-drive simulator and the
//! ultrasonic safety gate.
//!
//! A wire frame is five bytes: `0xAA, seq, cmd, chk, 0x55` where `cmd` is
//! the ASCII code of L/R/F/B/S and `chk = 0xAA ^ seq ^ cmd`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Command;

pub const SYNC: u8 = 0xAA;
pub const TRAILER: u8 = 0x55;
pub const FRAME_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated: {0} of 5 bytes")]
    Truncated(usize),
    #[error("bad sync byte {0:#04x}")]
    BadSync(u8),
    #[error("bad trailer byte {0:#04x}")]
    BadTrailer(u8),
    #[error("checksum mismatch: expected {expected:#04x}, found {found:#04x}")]
    Checksum { expected: u8, found: u8 },
    #[error("unknown command byte {0:#04x}")]
    UnknownCommand(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireFrame(pub [u8; FRAME_LEN]);

impl WireFrame {
    pub fn bytes(&self) -> &[u8; FRAME_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

pub fn command_byte(cmd: Command) -> u8 {
    match cmd {
        Command::Left => b'L',
        Command::Right => b'R',
        Command::Forward => b'F',
        Command::Reverse => b'B',
        Command::Stop => b'S',
    }
}

pub fn command_from_byte(b: u8) -> Option<Command> {
    match b {
        b'L' => Some(Command::Left),
        b'R' => Some(Command::Right),
        b'F' => Some(Command::Forward),
        b'B' => Some(Command::Reverse),
        b'S' => Some(Command::Stop),
        _ => None,
    }
}

pub fn encode_command(cmd: Command, seq: u8) -> WireFrame {
    let c = command_byte(cmd);
    WireFrame([SYNC, seq, c, SYNC ^ seq ^ c, TRAILER])
}

/// Validates sync, trailer, checksum and command byte, in that order.
pub fn decode_command(bytes: &[u8]) -> std::result::Result<(Command, u8), FrameError> {
    if bytes.len() < FRAME_LEN {
        return Err(FrameError::Truncated(bytes.len()));
    }
    let [sync, seq, cmd, chk, trailer] = [bytes[0], bytes[1], bytes[2], bytes[3], bytes[4]];
    if sync != SYNC {
        return Err(FrameError::BadSync(sync));
    }
    if trailer != TRAILER {
        return Err(FrameError::BadTrailer(trailer));
    }
    let expected = sync ^ seq ^ cmd;
    if chk != expected {
        return Err(FrameError::Checksum { expected, found: chk });
    }
    let cmd = command_from_byte(cmd).ok_or(FrameError::UnknownCommand(cmd))?;
    Ok((cmd, seq))
}

/// Incremental decoder for a byte stream. On a bad frame it drops one byte
/// and hunts for the next sync byte.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<std::result::Result<(Command, u8), FrameError>> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut start = 0;
        while self.buf.len() - start >= FRAME_LEN {
            if self.buf[start] != SYNC {
                start += 1;
                continue;
            }
            match decode_command(&self.buf[start..start + FRAME_LEN]) {
                Ok(v) => {
                    out.push(Ok(v));
                    start += FRAME_LEN;
                }
                Err(e) => {
                    out.push(Err(e));
                    start += 1;
                }
            }
        }
        self.buf.drain(..start);
        out
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn centered(half_width: f64, half_height: f64) -> Self {
        Self::new(-half_width, -half_height, half_width, half_height)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min && other.x_max <= self.x_max && other.y_min >= self.y_min && other.y_max <= self.y_max
    }

    fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    /// Distance along a unit ray from an outside or boundary origin to the
    /// rectangle, 0 when the origin is inside. `None` on a miss.
    fn ray_entry(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [(ox, dx, self.x_min, self.x_max), (oy, dy, self.y_min, self.y_max)] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let t1 = (lo - o) / d;
                let t2 = (hi - o) / d;
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
        }
        (t_near <= t_far && t_far >= 0.0).then(|| t_near.max(0.0))
    }

    /// Distance along a unit ray from an inside origin to the boundary.
    fn ray_exit(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> f64 {
        let mut t = f64::INFINITY;
        if dx > 0.0 {
            t = t.min((self.x_max - ox) / dx);
        } else if dx < 0.0 {
            t = t.min((self.x_min - ox) / dx);
        }
        if dy > 0.0 {
            t = t.min((self.y_max - oy) / dy);
        } else if dy < 0.0 {
            t = t.min((self.y_min - oy) / dy);
        }
        t.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
    pub sensor_range: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            bounds: Rect::centered(5.0, 5.0),
            obstacles: Vec::new(),
            sensor_range: 4.0,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.bounds.is_valid() {
            return Err(Error::invalid("world bounds are empty"));
        }
        if !(self.sensor_range > 0.0) {
            return Err(Error::invalid("sensor range must be > 0"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.is_valid() || !self.bounds.contains_rect(o) {
                return Err(Error::invalid(format!("obstacle {i} is empty or outside the bounds")));
            }
        }
        Ok(())
    }

    /// Free-space distance along a ray, clamped to the sensor range.
    pub fn ray_distance(&self, x: f64, y: f64, heading: f64) -> f64 {
        let (dy, dx) = heading.sin_cos();
        let mut best = self.bounds.ray_exit(x, y, dx, dy);
        for o in &self.obstacles {
            if let Some(t) = o.ray_entry(x, y, dx, dy) {
                best = best.min(t);
            }
        }
        best.min(self.sensor_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    pub stop_distance_m: f64,
    pub forward_speed: f64,
    pub reverse_speed: f64,
    pub turn_rate_deg_s: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            stop_distance_m: 0.3,
            forward_speed: 0.5,
            reverse_speed: 0.3,
            turn_rate_deg_s: 45.0,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_distance_m > 0.0) {
            return Err(Error::invalid("stop distance must be > 0"));
        }
        if !(self.forward_speed > 0.0 && self.reverse_speed > 0.0 && self.turn_rate_deg_s > 0.0) {
            return Err(Error::invalid("speeds must be > 0"));
        }
        Ok(())
    }

    pub fn turn_rate_rad_s(&self) -> f64 {
        self.turn_rate_deg_s.to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub front_m: f64,
    pub rear_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians in (−π, π].
    pub heading: f64,
    pub active_command: Command,
    pub clock: f64,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            active_command: Command::Stop,
            clock: 0.0,
        }
    }
}

impl VehicleState {
    pub fn at(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_heading(heading),
            ..Self::default()
        }
    }
}

/// Wrap an angle into (−π, π].
pub fn normalize_heading(h: f64) -> f64 {
    let r = h.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Front and rear ultrasonic ranges.
pub fn sense(state: &VehicleState, world: &WorldSpec) -> Result<SensorReading> {
    if !world.bounds.contains(state.x, state.y) {
        return Err(Error::OutOfBounds { x: state.x, y: state.y });
    }
    Ok(SensorReading {
        front_m: world.ray_distance(state.x, state.y, state.heading),
        rear_m: world.ray_distance(state.x, state.y, state.heading + PI),
    })
}

/// Replace Forward/Reverse with Stop when the facing sensor reads below the
/// stop distance. Turns and Stop pass unchanged.
pub fn safety_gate(cmd: Command, sensors: SensorReading, cfg: &SafetyConfig) -> Command {
    safety_gate_ahead(cmd, sensors, cfg, 0.0)
}

/// Gate against the range left after travelling for `dt` seconds, so that
/// the executed step cannot end inside the stop distance.
pub fn safety_gate_ahead(cmd: Command, sensors: SensorReading, cfg: &SafetyConfig, dt: f64) -> Command {
    // guards against the ray-cast rounding a hair below the threshold
    const MARGIN: f64 = 1e-9;
    let margin = if dt > 0.0 { MARGIN } else { 0.0 };
    match cmd {
        Command::Forward if sensors.front_m - cfg.forward_speed * dt < cfg.stop_distance_m + margin => Command::Stop,
        Command::Reverse if sensors.rear_m - cfg.reverse_speed * dt < cfg.stop_distance_m + margin => Command::Stop,
        other => other,
    }
}

/// First-order integration of one command over `dt` seconds.
pub fn step(state: &VehicleState, cmd: Command, dt: f64, cfg: &SafetyConfig) -> Result<VehicleState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    let mut next = VehicleState {
        active_command: cmd,
        clock: state.clock + dt,
        ..*state
    };
    let (s, c) = state.heading.sin_cos();
    match cmd {
        Command::Forward => {
            next.x += cfg.forward_speed * dt * c;
            next.y += cfg.forward_speed * dt * s;
        }
        Command::Reverse => {
            next.x -= cfg.reverse_speed * dt * c;
            next.y -= cfg.reverse_speed * dt * s;
        }
        Command::Left => next.heading = normalize_heading(state.heading + cfg.turn_rate_rad_s() * dt),
        Command::Right => next.heading = normalize_heading(state.heading - cfg.turn_rate_rad_s() * dt),
        Command::Stop => {}
    }
    Ok(next)
}

/// One row of the episode log: the state before the step, the requested
/// command, the sensor readings and the command actually executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub clock: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub cmd: Command,
    pub front: f64,
    pub rear: f64,
    pub gated_cmd: Command,
}

pub const EPISODE_LOG_HEADER: &str = "clock,x,y,heading,cmd,front,rear,gated_cmd";

/// Gated simulation of one vehicle in one world.
#[derive(Debug, Clone)]
pub struct Episode {
    pub world: WorldSpec,
    pub safety: SafetyConfig,
    pub state: VehicleState,
    pub log: Vec<EpisodeRow>,
}

impl Episode {
    pub fn new(world: WorldSpec, safety: SafetyConfig, start: VehicleState) -> Result<Self> {
        world.validate()?;
        safety.validate()?;
        sense(&start, &world)?;
        Ok(Self {
            world,
            safety,
            state: start,
            log: Vec::new(),
        })
    }

    /// Sense, gate and integrate one step.
    pub fn step(&mut self, cmd: Command, dt: f64) -> Result<EpisodeRow> {
        let sensors = sense(&self.state, &self.world)?;
        let gated = safety_gate_ahead(cmd, sensors, &self.safety, dt);
        let row = EpisodeRow {
            clock: self.state.clock,
            x: self.state.x,
            y: self.state.y,
            heading: self.state.heading,
            cmd,
            front: sensors.front_m,
            rear: sensors.rear_m,
            gated_cmd: gated,
        };
        self.state = step(&self.state, gated, dt, &self.safety)?;
        self.log.push(row);
        Ok(row)
    }

    pub fn write_log<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_episode_log(&self.log, w)
    }
}

pub fn write_episode_log<W: Write>(rows: &[EpisodeRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{EPISODE_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.clock, r.x, r.y, r.heading, r.cmd, r.front, r.rear, r.gated_cmd
        )?;
    }
    Ok(())
}
