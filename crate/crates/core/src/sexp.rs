//! Minimal s-expression reader with source positions.

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SexpKind {
    Atom(String),
    /// A string literal with SMT-LIB `""` escapes resolved.
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sexp {
    pub kind: SexpKind,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct SexpError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(l) => Some(l),
            _ => None,
        }
    }

    /// Head atom of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(|h| h.atom())
    }

    pub fn err(&self, msg: impl Into<String>) -> SexpError {
        SexpError { line: self.line, col: self.col, msg: msg.into() }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Reader<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn error(&self, msg: &str) -> SexpError {
        SexpError { line: self.line, col: self.col, msg: msg.into() }
    }

    fn read(&mut self) -> Result<Option<Sexp>, SexpError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let Some(&c) = self.chars.peek() else { return Ok(None) };
        let kind = match c {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        None => return Err(SexpError { line, col, msg: "unclosed '('".into() }),
                        Some(')') => {
                            self.bump();
                            break;
                        }
                        Some(_) => items.push(self.read()?.expect("peeked a character")),
                    }
                }
                SexpKind::List(items)
            }
            ')' => return Err(self.error("unexpected ')'")),
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(SexpError { line, col, msg: "unterminated string".into() }),
                        Some('"') => {
                            if self.chars.peek() == Some(&'"') {
                                self.bump();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
                SexpKind::Str(s)
            }
            '|' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(SexpError { line, col, msg: "unterminated '|'".into() }),
                        Some('|') => break,
                        Some(c) => s.push(c),
                    }
                }
                SexpKind::Atom(s)
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' || c == '"' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                SexpKind::Atom(s)
            }
        };
        Ok(Some(Sexp { kind, line, col }))
    }
}

pub fn parse_all(src: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut r = Reader { chars: src.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(s) = r.read()? {
        out.push(s);
    }
    Ok(out)
}
