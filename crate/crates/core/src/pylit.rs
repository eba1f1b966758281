//! Parser for the subset of Python literal syntax that appears in generated
//! code: header defaults and kwargs dictionaries. Produces JSON values.

use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PyLitError {
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected character {found:?} at offset {offset}")]
    Unexpected { found: char, offset: usize },
    #[error("invalid number {0:?}")]
    BadNumber(String),
    #[error("dict keys must be strings or numbers, at offset {0}")]
    BadKey(usize),
    #[error("trailing input at offset {0}")]
    Trailing(usize),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<(), PyLitError> {
        self.skip_ws();
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(found) => Err(PyLitError::Unexpected {
                found,
                offset: self.pos - found.len_utf8(),
            }),
            None => Err(PyLitError::Eof),
        }
    }

    fn value(&mut self) -> Result<Value, PyLitError> {
        self.skip_ws();
        let c = self.peek().ok_or(PyLitError::Eof)?;
        match c {
            '{' => self.dict(),
            '[' => self.seq('[', ']'),
            '(' => self.seq('(', ')'),
            '"' | '\'' => self.string().map(Value::String),
            'r' | 'R' | 'b' | 'u' | 'f'
                if matches!(self.src[self.pos + 1..].chars().next(), Some('"' | '\'')) =>
            {
                self.bump();
                self.string().map(Value::String)
            }
            c if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => self.number(),
            c if c.is_alphabetic() || c == '_' => self.word(),
            found => Err(PyLitError::Unexpected {
                found,
                offset: self.pos,
            }),
        }
    }

    fn word(&mut self) -> Result<Value, PyLitError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.bump();
        }
        match &self.src[start..self.pos] {
            "True" | "true" => Ok(Value::Bool(true)),
            "False" | "false" => Ok(Value::Bool(false)),
            "None" | "null" => Ok(Value::Null),
            _ => Err(PyLitError::Unexpected {
                found: self.src[start..].chars().next().unwrap_or(' '),
                offset: start,
            }),
        }
    }

    fn number(&mut self) -> Result<Value, PyLitError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.bump();
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '.' || c == '_'
            || ((c == '-' || c == '+') && matches!(self.src[..self.pos].chars().last(), Some('e' | 'E'))))
        {
            self.bump();
        }
        let text: String = self.src[start..self.pos].chars().filter(|&c| c != '_').collect();
        let bad = || PyLitError::BadNumber(text.clone());
        let is_float = text.contains(['.', 'e', 'E']) && !text.contains(['x', 'X']);
        if !is_float {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(Value::Number(i.into()));
            }
        }
        let f: f64 = text.parse().map_err(|_| bad())?;
        Number::from_f64(f).map(Value::Number).ok_or_else(bad)
    }

    fn string(&mut self) -> Result<String, PyLitError> {
        let quote = self.bump().ok_or(PyLitError::Eof)?;
        let triple = self.src[self.pos..].starts_with(&format!("{quote}{quote}"));
        if triple {
            self.pos += 2;
        }
        let mut out = String::new();
        loop {
            let c = self.bump().ok_or(PyLitError::Eof)?;
            if c == quote {
                if !triple {
                    return Ok(out);
                }
                if self.src[self.pos..].starts_with(&format!("{quote}{quote}")) {
                    self.pos += 2;
                    return Ok(out);
                }
                out.push(c);
                continue;
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let e = self.bump().ok_or(PyLitError::Eof)?;
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                '\\' | '\'' | '"' => out.push(e),
                '\n' => {}
                'u' | 'x' => {
                    let len = if e == 'u' { 4 } else { 2 };
                    let hex = self.src.get(self.pos..self.pos + len).ok_or(PyLitError::Eof)?;
                    let code = u32::from_str_radix(hex, 16).map_err(|_| PyLitError::Unexpected {
                        found: e,
                        offset: self.pos,
                    })?;
                    self.pos += len;
                    out.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                }
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
        }
    }

    fn seq(&mut self, open: char, close: char) -> Result<Value, PyLitError> {
        self.expect(open)?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(close) {
                self.bump();
                return Ok(Value::Array(items));
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some(c) if c == close => return Ok(Value::Array(items)),
                Some(found) => {
                    return Err(PyLitError::Unexpected {
                        found,
                        offset: self.pos - found.len_utf8(),
                    })
                }
                None => return Err(PyLitError::Eof),
            }
        }
    }

    fn dict(&mut self) -> Result<Value, PyLitError> {
        self.expect('{')?;
        let mut map = Map::new();
        loop {
            self.skip_ws();
            if self.peek() == Some('}') {
                self.bump();
                return Ok(Value::Object(map));
            }
            let key_at = self.pos;
            let key = match self.value()? {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                _ => return Err(PyLitError::BadKey(key_at)),
            };
            self.expect(':')?;
            let value = self.value()?;
            map.insert(key, value);
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some('}') => return Ok(Value::Object(map)),
                Some(found) => {
                    return Err(PyLitError::Unexpected {
                        found,
                        offset: self.pos - found.len_utf8(),
                    })
                }
                None => return Err(PyLitError::Eof),
            }
        }
    }
}

/// Parses one Python literal (dict, list, tuple, str, number, bool, None).
/// Tuples become arrays.
pub fn parse(src: &str) -> Result<Value, PyLitError> {
    let mut p = Parser { src, pos: 0 };
    let v = p.value()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(PyLitError::Trailing(p.pos));
    }
    Ok(v)
}

/// Renders a JSON value as Python literal source.
pub fn to_python(value: &Value) -> String {
    match value {
        Value::Null => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => serde_json::to_string(s).expect("string serializes"),
        Value::Array(items) => format!("[{}]", items.iter().map(to_python).collect::<Vec<_>>().join(", ")),
        Value::Object(map) => format!(
            "{{{}}}",
            map.iter()
                .map(|(k, v)| format!("{}: {}", serde_json::to_string(k).expect("key"), to_python(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}
