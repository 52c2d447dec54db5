//! Reader and writer for the line-oriented task file format (`arenaspec v1`).
//! The grammar is published in `docs/arenaspec.ebnf`.

use std::fmt::Write as _;

use super::geometry::Vec3;
use super::spec::{
    AgentStart, ArenaSpec, Blackout, ObjectKind, ObjectSize, ObjectSpec, Rgb, Surface,
    DEFAULT_ARENA_SIZE,
};
use super::ArenaError;

pub const HEADER: &str = "arenaspec v1";

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    indented: bool,
    key: Token<'a>,
    values: Vec<Token<'a>>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ArenaError {
    ArenaError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Splits on ASCII whitespace while keeping 1-based character columns.
fn tokens(text: &str, base_column: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (ci, (bi, ch)) in text.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((bi, ci)),
            (true, Some((sb, sc))) => {
                out.push(Token {
                    text: &text[sb..bi],
                    column: base_column + sc,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((sb, sc)) = start {
        out.push(Token {
            text: &text[sb..],
            column: base_column + sc,
        });
    }
    out
}

fn split_line(number: usize, raw: &str) -> Result<Option<Line<'_>>, ArenaError> {
    let content = match raw.find('#') {
        Some(i) => &raw[..i],
        None => raw,
    };
    if content.trim().is_empty() {
        return Ok(None);
    }
    let indented = content.starts_with(' ') || content.starts_with('\t');
    let Some(colon) = content.find(':') else {
        let col = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        return Err(syntax(number, col, "expected `key: value`"));
    };
    let key_part = &content[..colon];
    let key_tokens = tokens(key_part, 1);
    let key = match key_tokens.as_slice() {
        [k] => Token {
            text: k.text,
            column: k.column,
        },
        [] => return Err(syntax(number, 1, "missing key before `:`")),
        [_, second, ..] => return Err(syntax(number, second.column, "keys cannot contain spaces")),
    };
    let value_column = content[..colon + 1].chars().count() + 1;
    let values = tokens(&content[colon + 1..], value_column);
    Ok(Some(Line {
        number,
        indented,
        key,
        values,
    }))
}

fn expect_count(line: &Line<'_>, counts: &[usize]) -> Result<(), ArenaError> {
    if counts.contains(&line.values.len()) {
        return Ok(());
    }
    let column = line
        .values
        .get(counts.iter().copied().max().unwrap_or(0))
        .map(|t| t.column)
        .unwrap_or(line.key.column + line.key.text.len() + 1);
    let expected = counts
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" or ");
    Err(syntax(
        line.number,
        column,
        format!("`{}` expects {expected} value(s), found {}", line.key.text, line.values.len()),
    ))
}

fn num(line: &Line<'_>, tok: &Token<'_>) -> Result<f64, ArenaError> {
    tok.text
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line.number, tok.column, format!("`{}` is not a number", tok.text)))
}

fn integer<T: std::str::FromStr>(line: &Line<'_>, tok: &Token<'_>) -> Result<T, ArenaError> {
    tok.text
        .parse::<T>()
        .map_err(|_| syntax(line.number, tok.column, format!("`{}` is not a valid integer", tok.text)))
}

fn vec3(line: &Line<'_>) -> Result<Vec3, ArenaError> {
    expect_count(line, &[3])?;
    Ok(Vec3::new(
        num(line, &line.values[0])?,
        num(line, &line.values[1])?,
        num(line, &line.values[2])?,
    ))
}

fn rgb(line: &Line<'_>, toks: &[Token<'_>]) -> Result<Rgb, ArenaError> {
    Ok(Rgb(
        integer(line, &toks[0])?,
        integer(line, &toks[1])?,
        integer(line, &toks[2])?,
    ))
}

#[derive(Default)]
struct ObjectDraft {
    kind: Option<ObjectKind>,
    line: usize,
    position: Option<Vec3>,
    size: Option<ObjectSize>,
    rotation: Option<f64>,
    color: Option<Rgb>,
}

impl ObjectDraft {
    fn finish(self) -> Result<ObjectSpec, ArenaError> {
        let kind = self.kind.expect("draft always has a kind");
        let missing = |field: &str| {
            syntax(self.line, 1, format!("object `{kind}` is missing `{field}`"))
        };
        let position = self.position.ok_or_else(|| missing("position"))?;
        let size = self.size.ok_or_else(|| missing("size"))?;
        Ok(ObjectSpec {
            kind,
            position,
            size,
            rotation: self.rotation.unwrap_or(0.0),
            color: self.color,
        })
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: &Line<'_>) -> Result<(), ArenaError> {
    if slot.is_some() {
        return Err(syntax(
            line.number,
            line.key.column,
            format!("duplicate `{}`", line.key.text),
        ));
    }
    *slot = Some(value);
    Ok(())
}

/// Parses and validates a task file.
pub fn load_arena(text: &str) -> Result<ArenaSpec, ArenaError> {
    let mut header_seen = false;
    let mut id = None;
    let mut size = None;
    let mut time_limit = None;
    let mut pass_mark = None;
    let mut agent_position: Option<Vec3> = None;
    let mut agent_heading = None;
    let mut blackouts = Vec::new();
    let mut palette = Vec::new();
    let mut objects = Vec::new();
    let mut current: Option<ObjectDraft> = None;

    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        if !header_seen {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content != HEADER {
                return Err(syntax(number, 1, format!("expected header `{HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        let Some(line) = split_line(number, raw)? else {
            continue;
        };

        if line.indented {
            let Some(draft) = current.as_mut() else {
                return Err(syntax(number, line.key.column, "indented field outside an object block"));
            };
            match line.key.text {
                "position" => set_once(&mut draft.position, vec3(&line)?, &line)?,
                "size" => {
                    expect_count(&line, &[1, 2, 3])?;
                    let v: Vec<f64> = line
                        .values
                        .iter()
                        .map(|t| num(&line, t))
                        .collect::<Result<_, _>>()?;
                    let s = match v.as_slice() {
                        [d] => ObjectSize::Diameter(*d),
                        [x, z] => ObjectSize::Extents(Vec3::new(*x, 0.0, *z)),
                        [x, y, z] => ObjectSize::Extents(Vec3::new(*x, *y, *z)),
                        _ => unreachable!(),
                    };
                    set_once(&mut draft.size, s, &line)?;
                }
                "rotation" => {
                    expect_count(&line, &[1])?;
                    set_once(&mut draft.rotation, num(&line, &line.values[0])?, &line)?;
                }
                "color" => {
                    expect_count(&line, &[3])?;
                    set_once(&mut draft.color, rgb(&line, &line.values)?, &line)?;
                }
                other => {
                    return Err(syntax(number, line.key.column, format!("unknown object field `{other}`")))
                }
            }
            continue;
        }

        if let Some(draft) = current.take() {
            objects.push(draft.finish()?);
        }
        match line.key.text {
            "object" => {
                expect_count(&line, &[1])?;
                let tok = &line.values[0];
                let kind = ObjectKind::from_keyword(tok.text).ok_or_else(|| {
                    syntax(number, tok.column, format!("unknown object kind `{}`", tok.text))
                })?;
                current = Some(ObjectDraft {
                    kind: Some(kind),
                    line: number,
                    ..Default::default()
                });
            }
            "id" => {
                expect_count(&line, &[1])?;
                set_once(&mut id, line.values[0].text.to_string(), &line)?;
            }
            "size" => {
                expect_count(&line, &[1])?;
                set_once(&mut size, num(&line, &line.values[0])?, &line)?;
            }
            "time_limit" => {
                expect_count(&line, &[1])?;
                set_once(&mut time_limit, integer::<u32>(&line, &line.values[0])?, &line)?;
            }
            "pass_mark" => {
                expect_count(&line, &[1])?;
                set_once(&mut pass_mark, num(&line, &line.values[0])?, &line)?;
            }
            "agent_position" => {
                if agent_position.is_some() {
                    return Err(ArenaError::Validation(
                        "exactly one agent start is allowed".into(),
                    ));
                }
                agent_position = Some(vec3(&line)?);
            }
            "agent_heading" => {
                expect_count(&line, &[1])?;
                set_once(&mut agent_heading, integer::<i32>(&line, &line.values[0])?, &line)?;
            }
            "blackout" => {
                expect_count(&line, &[2])?;
                blackouts.push(Blackout {
                    start: integer(&line, &line.values[0])?,
                    end: integer(&line, &line.values[1])?,
                });
            }
            "palette" => {
                expect_count(&line, &[4])?;
                let tok = &line.values[0];
                let surface = Surface::from_keyword(tok.text).ok_or_else(|| {
                    syntax(number, tok.column, format!("unknown surface `{}`", tok.text))
                })?;
                palette.push((surface, rgb(&line, &line.values[1..])?));
            }
            other => return Err(syntax(number, line.key.column, format!("unknown field `{other}`"))),
        }
    }
    if let Some(draft) = current.take() {
        objects.push(draft.finish()?);
    }
    if !header_seen {
        return Err(syntax(1, 1, format!("expected header `{HEADER}`")));
    }
    let id = id.ok_or_else(|| ArenaError::Validation("missing `id`".into()))?;
    let time_limit = time_limit.ok_or_else(|| ArenaError::Validation("missing `time_limit`".into()))?;
    let position = agent_position
        .ok_or_else(|| ArenaError::Validation("exactly one agent start is required".into()))?;

    let mut spec = ArenaSpec {
        id,
        size: size.unwrap_or(DEFAULT_ARENA_SIZE),
        time_limit,
        pass_mark: pass_mark.unwrap_or(0.0),
        agent_start: AgentStart {
            position,
            heading: agent_heading.unwrap_or(0).rem_euclid(360),
        },
        objects,
        blackouts,
        palette_overrides: palette,
    };
    spec.validate()?;
    spec.blackouts.sort_by_key(|b| b.start);
    Ok(spec)
}

/// Canonical text form; `load_arena(to_text(s)) == s` for every valid spec.
pub fn to_text(spec: &ArenaSpec) -> String {
    let mut out = String::new();
    let v3 = |v: Vec3| format!("{} {} {}", v.x, v.y, v.z);
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "id: {}", spec.id).unwrap();
    writeln!(out, "size: {}", spec.size).unwrap();
    writeln!(out, "time_limit: {}", spec.time_limit).unwrap();
    writeln!(out, "pass_mark: {}", spec.pass_mark).unwrap();
    writeln!(out, "agent_position: {}", v3(spec.agent_start.position)).unwrap();
    writeln!(out, "agent_heading: {}", spec.agent_start.heading).unwrap();
    for b in &spec.blackouts {
        writeln!(out, "blackout: {} {}", b.start, b.end).unwrap();
    }
    for (s, c) in &spec.palette_overrides {
        writeln!(out, "palette: {} {} {} {}", s.keyword(), c.0, c.1, c.2).unwrap();
    }
    for obj in &spec.objects {
        writeln!(out).unwrap();
        writeln!(out, "object: {}", obj.kind.keyword()).unwrap();
        writeln!(out, "  position: {}", v3(obj.position)).unwrap();
        match obj.size {
            ObjectSize::Diameter(d) => writeln!(out, "  size: {d}").unwrap(),
            ObjectSize::Extents(e) => writeln!(out, "  size: {}", v3(e)).unwrap(),
        }
        if obj.rotation != 0.0 {
            writeln!(out, "  rotation: {}", obj.rotation).unwrap();
        }
        if let Some(c) = obj.color {
            writeln!(out, "  color: {} {} {}", c.0, c.1, c.2).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "arenaspec v1
id: minimal
time_limit: 500
agent_position: 20 0 4

object: green_goal
  position: 20 0 20
  size: 1
";

    #[test]
    fn minimal_file() {
        let spec = load_arena(MINIMAL).unwrap();
        assert_eq!(spec.objects.len(), 1);
        assert_eq!(spec.objects[0].kind, ObjectKind::GreenGoal);
        assert_eq!(spec.size, 40.0);
        assert_eq!(spec.time_limit, 500);
        assert_eq!(spec.pass_mark, 0.0);
        assert_eq!(spec.agent_start.heading, 0);
    }

    #[test]
    fn overlapping_blackouts_rejected() {
        let text = format!("{MINIMAL}blackout: 10 50\nblackout: 40 60\n");
        assert_eq!(
            load_arena(&text).unwrap_err(),
            ArenaError::Validation("blackouts overlap".into())
        );
    }

    #[test]
    fn blackout_past_time_limit_rejected() {
        let text = format!("{MINIMAL}blackout: 400 501\n");
        assert!(matches!(load_arena(&text), Err(ArenaError::Validation(_))));
    }

    #[test]
    fn syntax_errors_carry_location() {
        let text = "arenaspec v1\nid: x\ntime_limit: soon\n";
        match load_arena(text).unwrap_err() {
            ArenaError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 13)),
            e => panic!("unexpected {e:?}"),
        }
        let text = "arenaspec v2\n";
        assert!(matches!(load_arena(text), Err(ArenaError::Syntax { line: 1, .. })));
        let text = format!("{MINIMAL}object: lava\n");
        match load_arena(&text).unwrap_err() {
            ArenaError::Syntax { line, column, .. } => assert_eq!((line, column), (9, 9)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn agent_start_is_unique() {
        let text = format!("{MINIMAL}agent_position: 5 0 5\n");
        assert!(matches!(load_arena(&text), Err(ArenaError::Validation(_))));
        let text = MINIMAL.replace("agent_position: 20 0 4\n", "");
        assert!(matches!(load_arena(&text), Err(ArenaError::Validation(_))));
    }

    #[test]
    fn fixed_colours_and_bounds_enforced() {
        let ramp = format!("{MINIMAL}\nobject: ramp\n  position: 10 0 10\n  size: 2 1 4\n  color: 1 2 3\n");
        assert!(matches!(load_arena(&ramp), Err(ArenaError::Validation(m)) if m.contains("colour")));
        let far = format!("{MINIMAL}\nobject: wall\n  position: 39 0 10\n  size: 4 1 1\n");
        assert!(matches!(load_arena(&far), Err(ArenaError::Validation(m)) if m.contains("outside")));
        let tall_zone = format!("{MINIMAL}\nobject: hot_zone\n  position: 10 0 10\n  size: 4 1 4\n");
        assert!(matches!(load_arena(&tall_zone), Err(ArenaError::Validation(m)) if m.contains("flat")));
    }

    #[test]
    fn writer_round_trips() {
        let text = format!(
            "{MINIMAL}palette: ground 10 20 30\nblackout: 5 9\n\nobject: wall\n  position: 10 0 10\n  size: 4 1.5 0.5\n  rotation: 30\n  color: 1 2 3\n\nobject: hot_zone\n  position: 30 0 30\n  size: 4 6\n"
        );
        let spec = load_arena(&text).unwrap();
        assert_eq!(load_arena(&to_text(&spec)).unwrap(), spec);
    }
}
