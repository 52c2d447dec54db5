use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

pub const MAX_GO_STEPS: i32 = 35;
pub const MAX_TURN_DEGREES: i32 = 360;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "command", content = "arg")]
pub enum Command {
    Think(String),
    Go(i32),
    Turn(i32),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Think(text) => {
                let q = quote_for(text);
                write!(f, "Think({q}{text}{q});")
            }
            Command::Go(n) => write!(f, "Go({n});"),
            Command::Turn(d) => write!(f, "Turn({d});"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<Command>,
    /// Byte range of each command in the source text.
    pub spans: Vec<Range<usize>>,
}

impl Script {
    pub fn from_commands(commands: Vec<Command>) -> Self {
        Self {
            spans: vec![0..0; commands.len()],
            commands,
        }
    }

    pub fn thoughts(&self) -> impl Iterator<Item = &str> {
        self.commands.iter().filter_map(|c| match c {
            Command::Think(t) => Some(t.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.commands {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    UnknownCommand,
    BadArgument,
    WrappedInQuotes,
    UnterminatedString,
    MissingSemicolon,
    EmptyScript,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl Location {
    fn at(text: &str, offset: usize) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        Self { offset, line, column }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{message} (line {}, column {})", location.line, location.column)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub location: Location,
    pub message: String,
}

const WRAPPING_QUOTES: [char; 6] = ['\'', '"', '\u{2018}', '\u{2019}', '\u{201c}', '\u{201d}'];

/// Closing characters accepted for each opening quote.
fn closers(open: char) -> Option<&'static [char]> {
    Some(match open {
        '\'' => &['\'', '\u{2019}'],
        '"' => &['"', '\u{201d}'],
        '\u{2018}' => &['\u{2019}', '\''],
        '\u{201c}' => &['\u{201d}', '"'],
        _ => return None,
    })
}

/// Picks a quote character that lets `text` survive a reparse.
fn quote_for(text: &str) -> char {
    ['\'', '"']
        .into_iter()
        .find(|q| !closes_early(text, closers(*q).unwrap()))
        .unwrap_or('"')
}

fn closes_early(text: &str, closing: &[char]) -> bool {
    text.char_indices()
        .any(|(i, c)| closing.contains(&c) && text[i + c.len_utf8()..].trim_start().starts_with(')'))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            kind,
            location: Location::at(self.src, offset),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn expect_semicolon(&mut self) -> Result<(), ParseError> {
        let after = self.pos;
        self.skip_ws();
        if self.peek() == Some(';') {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(
                ParseErrorKind::MissingSemicolon,
                after,
                "commands must end with `;`",
            ))
        }
    }

    fn think(&mut self) -> Result<Command, ParseError> {
        self.skip_ws();
        let open_at = self.pos;
        let Some(open) = self.peek() else {
            return Err(self.err(ParseErrorKind::UnterminatedString, open_at, "input ends inside Think"));
        };
        let Some(closing) = closers(open) else {
            return Err(self.err(
                ParseErrorKind::BadArgument,
                open_at,
                "Think expects a quoted string",
            ));
        };
        let body_start = open_at + open.len_utf8();
        let body = &self.src[body_start..];
        for (i, c) in body.char_indices() {
            if !closing.contains(&c) {
                continue;
            }
            let rest = &body[i + c.len_utf8()..];
            let trimmed = rest.trim_start();
            if trimmed.starts_with(')') {
                let text = body[..i].to_string();
                self.pos = body_start + i + c.len_utf8() + (rest.len() - trimmed.len()) + 1;
                return Ok(Command::Think(text));
            }
        }
        Err(self.err(
            ParseErrorKind::UnterminatedString,
            open_at,
            "Think string is never closed",
        ))
    }

    fn integer(&mut self, name: &str, limit: i32, allow_zero: bool) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let sign_len = usize::from(rest.starts_with('-') || rest.starts_with('+'));
        let digits = rest[sign_len..].chars().take_while(char::is_ascii_digit).count();
        let end = start + sign_len + digits;
        self.pos = end;
        self.skip_ws();
        if digits == 0 || self.peek() != Some(')') {
            let shown: String = rest.chars().take_while(|c| *c != ')' && *c != ';').take(16).collect();
            return Err(self.err(
                ParseErrorKind::BadArgument,
                start,
                format!("{name} expects an integer argument, found `{shown}`"),
            ));
        }
        self.pos += 1;
        let value = self.src[start..end]
            .parse::<i32>()
            .ok()
            .filter(|v| v.abs() <= limit && (allow_zero || *v != 0));
        value.ok_or_else(|| {
            let range = if allow_zero {
                format!("[-{limit}, {limit}]")
            } else {
                format!("[-{limit}, -1] or [1, {limit}]")
            };
            self.err(
                ParseErrorKind::BadArgument,
                start,
                format!("{name} argument must be in {range}"),
            )
        })
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Extracts the `CMD(ARG);` sequence from a raw agent reply. Prose around
/// and between commands is ignored.
pub fn parse(text: &str) -> Result<Script, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let mut commands = Vec::new();
    let mut spans = Vec::new();
    let mut prev: Option<char> = None;

    while let Some(c) = p.peek() {
        let at_word = c.is_ascii_alphabetic() && !prev.is_some_and(is_ident_char);
        if !at_word {
            prev = Some(c);
            p.pos += c.len_utf8();
            continue;
        }
        let start = p.pos;
        let ident_len = text[start..].chars().take_while(|c| is_ident_char(*c)).count();
        let ident = &text[start..start + ident_len];
        let after_ident = start + ident_len;
        p.pos = after_ident;
        let known = match ident.to_ascii_lowercase().as_str() {
            "think" => Some(0),
            "go" => Some(1),
            "turn" => Some(2),
            _ => None,
        };
        match known {
            Some(which) => {
                p.skip_ws();
                if p.peek() != Some('(') {
                    prev = text[..p.pos].chars().next_back();
                    continue;
                }
                if let Some(q) = prev.filter(|q| WRAPPING_QUOTES.contains(q)) {
                    return Err(p.err(
                        ParseErrorKind::WrappedInQuotes,
                        start - q.len_utf8(),
                        "commands must not be wrapped in quotes",
                    ));
                }
                p.pos += 1;
                let cmd = match which {
                    0 => p.think()?,
                    1 => Command::Go(p.integer("Go", MAX_GO_STEPS, false)?),
                    _ => Command::Turn(p.integer("Turn", MAX_TURN_DEGREES, true)?),
                };
                p.expect_semicolon()?;
                commands.push(cmd);
                spans.push(start..p.pos);
                prev = Some(';');
            }
            None => {
                let looks_like_command = ident.starts_with(|c: char| c.is_ascii_uppercase())
                    && text[after_ident..].starts_with('(')
                    && text[after_ident..]
                        .split('\n')
                        .next()
                        .and_then(|l| l.find(')').map(|i| l[i + 1..].trim_start().starts_with(';')))
                        .unwrap_or(false);
                if looks_like_command {
                    return Err(p.err(
                        ParseErrorKind::UnknownCommand,
                        start,
                        format!("unknown command `{ident}`; use Think, Go or Turn"),
                    ));
                }
                prev = ident.chars().next_back();
            }
        }
    }
    if commands.is_empty() {
        return Err(p.err(
            ParseErrorKind::EmptyScript,
            0,
            "no Think, Go or Turn command found",
        ));
    }
    Ok(Script { commands, spans })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmds(text: &str) -> Vec<Command> {
        parse(text).unwrap().commands
    }

    fn kind(text: &str) -> ParseErrorKind {
        parse(text).unwrap_err().kind
    }

    #[test]
    fn single_go() {
        assert_eq!(cmds("Go(5);"), vec![Command::Go(5)]);
    }

    #[test]
    fn think_then_turn() {
        assert_eq!(
            cmds("Think('I would like to investigate what is happening to my left');Turn(-90);"),
            vec![
                Command::Think("I would like to investigate what is happening to my left".into()),
                Command::Turn(-90)
            ]
        );
        assert_eq!(
            cmds("Think('reward behind me');Turn(180);"),
            vec![Command::Think("reward behind me".into()), Command::Turn(180)]
        );
    }

    #[test]
    fn quoted_script_rejected() {
        let e = parse("'Go(5);'").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::WrappedInQuotes);
        assert_eq!(e.location.offset, 0);
        assert_eq!(kind("'Think('Something');'Go(5);' '"), ParseErrorKind::WrappedInQuotes);
        // Spaces inside the outer quotes are tolerated.
        assert_eq!(cmds("' Think('Something');Go(5); '").len(), 2);
    }

    #[test]
    fn think_strings() {
        assert_eq!(
            cmds("Think(\"I can move forwards and backwards with Go\");Go(3);"),
            vec![
                Command::Think("I can move forwards and backwards with Go".into()),
                Command::Go(3)
            ]
        );
        assert_eq!(
            cmds("Think(\"I'll move (carefully)\"); Go(9);")[0],
            Command::Think("I'll move (carefully)".into())
        );
        assert_eq!(cmds("Think('it's here');")[0], Command::Think("it's here".into()));
        assert_eq!(
            cmds("Think(\u{201c}curly\u{201d});")[0],
            Command::Think("curly".into())
        );
        assert_eq!(kind("Think('never closed);"), ParseErrorKind::UnterminatedString);
        assert_eq!(kind("Think(unquoted);"), ParseErrorKind::BadArgument);
    }

    #[test]
    fn arguments_checked() {
        assert_eq!(kind("Go(1.5);"), ParseErrorKind::BadArgument);
        assert_eq!(kind("Go(0);"), ParseErrorKind::BadArgument);
        assert_eq!(kind("Go(36);"), ParseErrorKind::BadArgument);
        assert_eq!(kind("Turn(361);"), ParseErrorKind::BadArgument);
        assert_eq!(kind("Turn(abc);"), ParseErrorKind::BadArgument);
        assert_eq!(cmds("Turn(-360);Turn(0);Go(-35);Go( +7 ) ;"), vec![
            Command::Turn(-360),
            Command::Turn(0),
            Command::Go(-35),
            Command::Go(7)
        ]);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(kind("Go(5)"), ParseErrorKind::MissingSemicolon);
        assert_eq!(kind("Jump(3);"), ParseErrorKind::UnknownCommand);
        assert_eq!(kind(""), ParseErrorKind::EmptyScript);
        assert_eq!(kind("I will go forward now."), ParseErrorKind::EmptyScript);
    }

    #[test]
    fn prose_is_ignored() {
        let text = "Sure! Here is my plan:\nThink('ball ahead');\nGo(12);\nLet me know (if needed).";
        assert_eq!(cmds(text), vec![Command::Think("ball ahead".into()), Command::Go(12)]);
        // `go` inside words or without parentheses is not a command.
        assert_eq!(cmds("Undergo this. I go now: Go(2);"), vec![Command::Go(2)]);
        assert_eq!(cmds("go(4);"), vec![Command::Go(4)]);
    }

    #[test]
    fn locations_point_into_source() {
        let text = "Think('a');\n  Go(x);";
        let e = parse(text).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadArgument);
        assert_eq!((e.location.line, e.location.column), (2, 6));
        assert!(e.location.offset < text.len());
    }

    #[test]
    fn spans_cover_commands() {
        let text = "ok Go(5); then Turn(90);";
        let s = parse(text).unwrap();
        assert_eq!(&text[s.spans[0].clone()], "Go(5);");
        assert_eq!(&text[s.spans[1].clone()], "Turn(90);");
    }

    #[test]
    fn pretty_print_quotes() {
        let s = Script::from_commands(vec![Command::Think("it's".into()), Command::Go(-3)]);
        assert_eq!(s.to_string(), "Think('it's');Go(-3);");
        let s = Script::from_commands(vec![Command::Think("it') x".into())]);
        assert_eq!(s.to_string(), "Think(\"it') x\");");
        assert_eq!(parse(&s.to_string()).unwrap().commands, s.commands);
    }
}
