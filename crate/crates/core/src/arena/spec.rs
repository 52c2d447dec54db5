use serde::{Deserialize, Serialize};
use std::fmt;

use super::geometry::{Obb, Vec2, Vec3};
use super::ArenaError;

pub const DEFAULT_ARENA_SIZE: f64 = 40.0;
pub const AGENT_DIAMETER: f64 = 1.0;
pub const AGENT_RADIUS: f64 = AGENT_DIAMETER / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const BLACK: Rgb = Rgb(0, 0, 0);
    pub const WHITE: Rgb = Rgb(255, 255, 255);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opacity {
    Opaque,
    Transparent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    YellowGoal,
    GreenGoal,
    RedGoal,
    DeathZone,
    HotZone,
    Wall(Opacity),
    Ramp,
    Platform,
    PushableBlock,
    Tunnel,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 11] = [
        ObjectKind::YellowGoal,
        ObjectKind::GreenGoal,
        ObjectKind::RedGoal,
        ObjectKind::DeathZone,
        ObjectKind::HotZone,
        ObjectKind::Wall(Opacity::Opaque),
        ObjectKind::Wall(Opacity::Transparent),
        ObjectKind::Ramp,
        ObjectKind::Platform,
        ObjectKind::PushableBlock,
        ObjectKind::Tunnel,
    ];

    /// Keyword used in task files.
    pub fn keyword(self) -> &'static str {
        match self {
            ObjectKind::YellowGoal => "yellow_goal",
            ObjectKind::GreenGoal => "green_goal",
            ObjectKind::RedGoal => "red_goal",
            ObjectKind::DeathZone => "death_zone",
            ObjectKind::HotZone => "hot_zone",
            ObjectKind::Wall(Opacity::Opaque) => "wall",
            ObjectKind::Wall(Opacity::Transparent) => "transparent_wall",
            ObjectKind::Ramp => "ramp",
            ObjectKind::Platform => "platform",
            ObjectKind::PushableBlock => "pushable_block",
            ObjectKind::Tunnel => "tunnel",
        }
    }

    pub fn from_keyword(word: &str) -> Option<ObjectKind> {
        Self::ALL.into_iter().find(|k| k.keyword() == word)
    }

    pub fn is_sphere(self) -> bool {
        matches!(
            self,
            ObjectKind::YellowGoal | ObjectKind::GreenGoal | ObjectKind::RedGoal
        )
    }

    pub fn is_zone(self) -> bool {
        matches!(self, ObjectKind::DeathZone | ObjectKind::HotZone)
    }

    /// Kinds whose colour carries no meaning and may be chosen per task.
    pub fn color_is_free(self) -> bool {
        matches!(self, ObjectKind::Wall(_) | ObjectKind::Tunnel)
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSize {
    Diameter(f64),
    /// Width (`x`), height (`y`) and depth (`z`) before rotation.
    Extents(Vec3),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    /// Footprint centre on the ground plane; `y` is the elevation of the base.
    pub position: Vec3,
    pub size: ObjectSize,
    /// Clockwise rotation about the vertical axis, in degrees.
    pub rotation: f64,
    pub color: Option<Rgb>,
}

impl ObjectSpec {
    pub fn diameter(&self) -> f64 {
        match self.size {
            ObjectSize::Diameter(d) => d,
            ObjectSize::Extents(e) => e.x.max(e.z),
        }
    }

    pub fn extents(&self) -> Vec3 {
        match self.size {
            ObjectSize::Diameter(d) => Vec3::new(d, d, d),
            ObjectSize::Extents(e) => e,
        }
    }

    /// Ground footprint at the given centre.
    pub fn footprint_at(&self, position: Vec3) -> Obb {
        let e = self.extents();
        Obb::new(position.flat(), e.x / 2.0, e.z / 2.0, self.rotation)
    }

    pub fn footprint(&self) -> Obb {
        self.footprint_at(self.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Ground,
    Fence,
    Sky,
    Wall,
}

impl Surface {
    pub const ALL: [Surface; 4] = [Surface::Ground, Surface::Fence, Surface::Sky, Surface::Wall];

    pub fn keyword(self) -> &'static str {
        match self {
            Surface::Ground => "ground",
            Surface::Fence => "fence",
            Surface::Sky => "sky",
            Surface::Wall => "wall",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Surface> {
        Self::ALL.into_iter().find(|s| s.keyword() == word)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStart {
    pub position: Vec3,
    pub heading: i32,
}

/// Half-open `[start, end)` interval of steps during which the lights are out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blackout {
    pub start: u32,
    pub end: u32,
}

impl Blackout {
    pub fn contains(&self, step: u32) -> bool {
        self.start <= step && step < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub id: String,
    pub size: f64,
    pub time_limit: u32,
    pub pass_mark: f64,
    pub agent_start: AgentStart,
    pub objects: Vec<ObjectSpec>,
    pub blackouts: Vec<Blackout>,
    pub palette_overrides: Vec<(Surface, Rgb)>,
}

impl ArenaSpec {
    pub fn is_blackout(&self, step: u32) -> bool {
        self.blackouts.iter().any(|b| b.contains(step))
    }

    pub fn palette_override(&self, surface: Surface) -> Option<Rgb> {
        self.palette_overrides
            .iter()
            .find(|(s, _)| *s == surface)
            .map(|(_, c)| *c)
    }

    /// Capability level encoded in ids of the form `lNN_...`.
    pub fn level(&self) -> Option<u8> {
        level_from_task_id(&self.id)
    }

    /// Checks every structural invariant, naming the first one violated.
    pub fn validate(&self) -> Result<(), ArenaError> {
        let invalid = |msg: String| Err(ArenaError::Validation(msg));
        if self.id.trim().is_empty() {
            return invalid("task id is empty".into());
        }
        if !(self.size.is_finite() && self.size > 0.0) {
            return invalid("arena size must be positive".into());
        }
        if self.time_limit == 0 {
            return invalid("time limit must be positive".into());
        }
        if !self.pass_mark.is_finite() {
            return invalid("pass mark must be finite".into());
        }
        let p = self.agent_start.position;
        let lo = AGENT_RADIUS;
        let hi = self.size - AGENT_RADIUS;
        if !(lo..=hi).contains(&p.x) || !(lo..=hi).contains(&p.z) || p.y < 0.0 {
            return invalid("agent start outside arena".into());
        }
        for (i, obj) in self.objects.iter().enumerate() {
            self.validate_object(i, obj)?;
        }
        let mut sorted = self.blackouts.clone();
        sorted.sort_by_key(|b| b.start);
        for b in &sorted {
            if b.start >= b.end {
                return invalid(format!("blackout [{}, {}) is empty", b.start, b.end));
            }
            if b.end > self.time_limit {
                return invalid(format!(
                    "blackout [{}, {}) exceeds time limit",
                    b.start, b.end
                ));
            }
        }
        if sorted.windows(2).any(|w| w[1].start < w[0].end) {
            return invalid("blackouts overlap".into());
        }
        for (i, (s, _)) in self.palette_overrides.iter().enumerate() {
            if self.palette_overrides[..i].iter().any(|(t, _)| t == s) {
                return invalid(format!("palette override for {} repeated", s.keyword()));
            }
        }
        Ok(())
    }

    fn validate_object(&self, index: usize, obj: &ObjectSpec) -> Result<(), ArenaError> {
        let invalid =
            |msg: &str| Err(ArenaError::Validation(format!("object {index} ({}): {msg}", obj.kind)));
        if !obj.rotation.is_finite() {
            return invalid("rotation must be finite");
        }
        match obj.size {
            ObjectSize::Diameter(d) => {
                if !obj.kind.is_sphere() {
                    return invalid("box kinds need three extents");
                }
                if !(d.is_finite() && d > 0.0) {
                    return invalid("sphere size must be positive");
                }
            }
            ObjectSize::Extents(e) => {
                if obj.kind.is_sphere() {
                    return invalid("sphere kinds take a single diameter");
                }
                if obj.kind.is_zone() {
                    if e.y != 0.0 || obj.position.y != 0.0 {
                        return invalid("zones are flat ground regions");
                    }
                    if !(e.x > 0.0 && e.z > 0.0) {
                        return invalid("zone extents must be positive");
                    }
                } else if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
                    return invalid("extents must be positive");
                }
            }
        }
        if obj.color.is_some() && !obj.kind.color_is_free() {
            return invalid("colour is fixed for this kind");
        }
        if obj.position.y < 0.0 {
            return invalid("object below ground");
        }
        let inside = |q: Vec2| {
            const EPS: f64 = 1e-9;
            q.x >= -EPS && q.x <= self.size + EPS && q.z >= -EPS && q.z <= self.size + EPS
        };
        let fits = if obj.kind.is_sphere() {
            let r = obj.diameter() / 2.0;
            let c = obj.position.flat();
            inside(Vec2::new(c.x - r, c.z - r)) && inside(Vec2::new(c.x + r, c.z + r))
        } else {
            obj.footprint().corners().into_iter().all(inside)
        };
        if !fits {
            return invalid("footprint outside arena");
        }
        Ok(())
    }
}

/// Parses the level number from ids such as `l05_task2`.
pub fn level_from_task_id(id: &str) -> Option<u8> {
    let rest = id.strip_prefix('l').or_else(|| id.strip_prefix('L'))?;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let tail = &rest[digits.len()..];
    if digits.is_empty() || !(tail.is_empty() || tail.starts_with('_') || tail.starts_with('-')) {
        return None;
    }
    let level: u8 = digits.parse().ok()?;
    (1..=10).contains(&level).then_some(level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!(level_from_task_id("l05_task2"), Some(5));
        assert_eq!(level_from_task_id("L10-3"), Some(10));
        assert_eq!(level_from_task_id("l11_task1"), None);
        assert_eq!(level_from_task_id("tutorial"), None);
        assert_eq!(level_from_task_id("l1x"), None);
    }

    #[test]
    fn keywords_round_trip() {
        for k in ObjectKind::ALL {
            assert_eq!(ObjectKind::from_keyword(k.keyword()), Some(k));
        }
    }
}
