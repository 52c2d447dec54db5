//! Best-effort reader for task files written for the external testbed
//! (YAML with `!ArenaConfig`, `!Item` and `!Vector3` tags). Only objects
//! with a counterpart here are accepted; anything else is named in the
//! error.

use serde_yaml::Value;

use super::HarnessError;
use crate::arena::{
    AgentStart, ArenaSpec, Blackout, ObjectKind, ObjectSize, ObjectSpec, Opacity, Rgb, Vec3,
    DEFAULT_ARENA_SIZE,
};

const DEFAULT_TIME_LIMIT: u32 = 250;

fn untag(v: &Value) -> &Value {
    match v {
        Value::Tagged(t) => untag(&t.value),
        other => other,
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Option<&'a Value> {
    untag(v).as_mapping()?.get(key).map(untag)
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Import(msg.into())
}

fn number(v: &Value, what: &str) -> Result<f64, HarnessError> {
    untag(v)
        .as_f64()
        .ok_or_else(|| bad(format!("{what} is not a number")))
}

fn vector(v: &Value, what: &str) -> Result<Vec3, HarnessError> {
    let get = |k: &str| {
        field(v, k)
            .ok_or_else(|| bad(format!("{what} lacks `{k}`")))
            .and_then(|x| number(x, what))
    };
    Ok(Vec3::new(get("x")?, get("y")?, get("z")?))
}

fn list<'a>(item: &'a Value, key: &str) -> Vec<&'a Value> {
    field(item, key)
        .and_then(Value::as_sequence)
        .map(|s| s.iter().map(untag).collect())
        .unwrap_or_default()
}

fn kind_for(name: &str) -> Option<ObjectKind> {
    Some(match name {
        "GoodGoal" => ObjectKind::GreenGoal,
        "GoodGoalMulti" => ObjectKind::YellowGoal,
        "BadGoal" => ObjectKind::RedGoal,
        "DeathZone" => ObjectKind::DeathZone,
        "HotZone" => ObjectKind::HotZone,
        "Wall" => ObjectKind::Wall(Opacity::Opaque),
        "WallTransparent" => ObjectKind::Wall(Opacity::Transparent),
        "Ramp" => ObjectKind::Ramp,
        "CylinderTunnel" | "Tunnel" => ObjectKind::Tunnel,
        "Cardbox1" | "Cardbox2" | "PushableBlock" => ObjectKind::PushableBlock,
        "Platform" => ObjectKind::Platform,
        _ => return None,
    })
}

/// Expands the testbed's blackout list: positive entries toggle the
/// lights at those frames, starting dark; a single negative entry `-n`
/// toggles every `n` frames.
fn blackouts(values: &[&Value], time_limit: u32) -> Result<Vec<Blackout>, HarnessError> {
    let frames: Vec<i64> = values
        .iter()
        .map(|v| {
            untag(v)
                .as_i64()
                .ok_or_else(|| bad("blackout entries must be integers"))
        })
        .collect::<Result<_, _>>()?;
    let mut toggles: Vec<u32> = match frames.as_slice() {
        [] => return Ok(Vec::new()),
        [n] if *n < 0 => {
            let period = n.unsigned_abs() as u32;
            (1..).map(|k| k * period).take_while(|f| *f < time_limit).collect()
        }
        fs => {
            if fs.iter().any(|f| *f < 0) {
                return Err(bad("mixed periodic and explicit blackouts"));
            }
            fs.iter().map(|f| *f as u32).collect()
        }
    };
    toggles.retain(|f| *f < time_limit);
    let mut out = Vec::new();
    for pair in toggles.chunks(2) {
        let start = pair[0];
        let end = pair.get(1).copied().unwrap_or(time_limit);
        if start < end {
            out.push(Blackout { start, end });
        }
    }
    Ok(out)
}

/// Converts the first arena of a testbed configuration.
pub fn import_aai_yaml(text: &str) -> Result<ArenaSpec, HarnessError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let arenas = field(&doc, "arenas").ok_or_else(|| bad("no `arenas` section"))?;
    let arena = match arenas {
        Value::Mapping(m) => m.values().next().map(untag),
        Value::Sequence(s) => s.first().map(untag),
        _ => None,
    }
    .ok_or_else(|| bad("`arenas` is empty"))?;

    let time_limit = match field(arena, "t").and_then(Value::as_u64) {
        Some(0) | None => DEFAULT_TIME_LIMIT,
        Some(t) => t as u32,
    };
    let pass_mark = field(arena, "pass_mark")
        .map(|v| number(v, "pass_mark"))
        .transpose()?
        .unwrap_or(0.0);

    let mut unsupported = Vec::new();
    let mut objects = Vec::new();
    let mut agent = None;
    for item in list(arena, "items") {
        let name = field(item, "name")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("item without a name"))?;
        let positions = list(item, "positions");
        let rotations = list(item, "rotations");
        let sizes = list(item, "sizes");
        let colors = list(item, "colors");
        if name == "Agent" {
            let p = positions
                .first()
                .ok_or_else(|| HarnessError::UnsupportedConstruct("Agent without position".into()))
                .and_then(|v| vector(v, "agent position"))?;
            let heading = rotations.first().map(|r| number(r, "rotation")).transpose()?;
            agent = Some(AgentStart {
                position: Vec3::new(p.x, p.y.max(0.0), p.z),
                heading: heading.unwrap_or(0.0).round() as i32,
            });
            continue;
        }
        let Some(kind) = kind_for(name) else {
            unsupported.push(name.to_string());
            continue;
        };
        if positions.is_empty() {
            unsupported.push(format!("{name} with random placement"));
            continue;
        }
        for (i, pos) in positions.iter().enumerate() {
            let mut position = vector(pos, name)?;
            if position.x < 0.0 || position.z < 0.0 {
                unsupported.push(format!("{name} with random placement"));
                continue;
            }
            position.y = position.y.max(0.0);
            let rotation = rotations
                .get(i)
                .map(|r| number(r, "rotation"))
                .transpose()?
                .unwrap_or(0.0);
            let raw = sizes
                .get(i)
                .map(|s| vector(s, "size"))
                .transpose()?
                .unwrap_or(Vec3::new(1.0, 1.0, 1.0));
            let size = if kind.is_sphere() {
                ObjectSize::Diameter(raw.x)
            } else if kind.is_zone() {
                ObjectSize::Extents(Vec3::new(raw.x, 0.0, raw.z))
            } else {
                ObjectSize::Extents(raw)
            };
            if kind.is_zone() {
                position.y = 0.0;
            }
            let color = match colors.get(i) {
                Some(c) if kind.color_is_free() => {
                    let ch = |k: &str| -> Result<u8, HarnessError> {
                        let v = field(c, k).ok_or_else(|| bad(format!("colour lacks `{k}`")))?;
                        Ok(number(v, "colour")?.clamp(0.0, 255.0) as u8)
                    };
                    Some(Rgb(ch("r")?, ch("g")?, ch("b")?))
                }
                _ => None,
            };
            objects.push(ObjectSpec {
                kind,
                position,
                size,
                rotation,
                color,
            });
        }
    }
    if !unsupported.is_empty() {
        unsupported.sort();
        unsupported.dedup();
        return Err(HarnessError::UnsupportedConstruct(unsupported.join(", ")));
    }
    let agent_start = agent.ok_or_else(|| {
        HarnessError::UnsupportedConstruct("agent with random placement".into())
    })?;
    let spec = ArenaSpec {
        id: "imported".into(),
        size: DEFAULT_ARENA_SIZE,
        time_limit,
        pass_mark,
        agent_start,
        objects,
        blackouts: blackouts(&list(arena, "blackouts"), time_limit)?,
        palette_overrides: Vec::new(),
    };
    spec.validate().map_err(|e| bad(e.to_string()))?;
    Ok(spec)
}
