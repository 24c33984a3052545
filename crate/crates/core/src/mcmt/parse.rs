//! Lexer and parser producing an unresolved syntax tree.

use crate::hierarchy::{Multiplicity, Potency};

use super::RuleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Eq,
    ArrowTok,
    Dollar,
    At,
    Dash,
    DotDot,
    Star,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::ArrowTok => "`->`".into(),
            Tok::Dollar => "`$`".into(),
            Tok::At => "`@`".into(),
            Tok::Dash => "`-`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> RuleError {
    RuleError::Syntax {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, RuleError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '{' | '}' | '[' | ']' | ':' | '=' | '$' | '@' | '*' => {
                let t = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    '$' => Tok::Dollar,
                    '@' => Tok::At,
                    _ => Tok::Star,
                };
                out.push((t, pos));
                advance(1, &mut i, &mut col);
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::ArrowTok, pos));
                advance(2, &mut i, &mut col);
            }
            '-' => {
                out.push((Tok::Dash, pos));
                advance(1, &mut i, &mut col);
            }
            '.' if chars.get(i + 1) == Some(&'.') => {
                out.push((Tok::DotDot, pos));
                advance(2, &mut i, &mut col);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let n = s
                    .parse()
                    .map_err(|_| syntax(pos, format!("number `{s}` is too large")))?;
                out.push((Tok::Int(n), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

#[derive(Debug, Clone)]
pub(crate) struct RawDecl {
    pub name: String,
    pub ty: String,
    pub constant: bool,
    pub mm: Option<usize>,
    pub potency: Option<Potency>,
    pub multiplicity: Option<Multiplicity>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub(crate) struct RawAssign {
    pub name: String,
    pub source: String,
    pub target: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct RawBlock {
    pub decls: Vec<RawDecl>,
    pub assigns: Vec<RawAssign>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawRule {
    pub name: String,
    pub pos: Pos,
    pub meta: RawBlock,
    pub from: RawBlock,
    pub to: RawBlock,
}

#[derive(Debug, Clone)]
pub(crate) struct RawModule {
    pub name: String,
    pub rules: Vec<RawRule>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, RuleError> {
        let (t, pos) = self.next();
        if t == want {
            Ok(pos)
        } else {
            Err(syntax(
                pos,
                format!("expected {}, found {}", want.describe(), t.describe()),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), RuleError> {
        match self.next() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (t, pos) => Err(syntax(
                pos,
                format!("expected identifier, found {}", t.describe()),
            )),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, RuleError> {
        match self.next() {
            (Tok::Ident(s), pos) if s == kw => Ok(pos),
            (t, pos) => Err(syntax(
                pos,
                format!("expected `{kw}`, found {}", t.describe()),
            )),
        }
    }

    fn int(&mut self) -> Result<u32, RuleError> {
        match self.next() {
            (Tok::Int(n), _) => Ok(n),
            (t, pos) => Err(syntax(
                pos,
                format!("expected number, found {}", t.describe()),
            )),
        }
    }

    fn module(&mut self) -> Result<RawModule, RuleError> {
        self.keyword("rules")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut rules = Vec::new();
        while *self.peek() != Tok::RBrace {
            rules.push(self.rule()?);
        }
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return Err(syntax(
                self.pos(),
                format!("unexpected {} after module", self.peek().describe()),
            ));
        }
        Ok(RawModule { name, rules })
    }

    fn rule(&mut self) -> Result<RawRule, RuleError> {
        let pos = self.keyword("rule")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.keyword("meta")?;
        let meta = self.block(true)?;
        self.keyword("from")?;
        let from = self.block(false)?;
        self.keyword("to")?;
        let to = self.block(false)?;
        self.expect(Tok::RBrace)?;
        Ok(RawRule {
            name,
            pos,
            meta,
            from,
            to,
        })
    }

    fn block(&mut self, meta: bool) -> Result<RawBlock, RuleError> {
        self.expect(Tok::LBrace)?;
        let mut block = RawBlock::default();
        while *self.peek() != Tok::RBrace {
            let (name, pos) = self.ident()?;
            match self.next() {
                (Tok::Colon, _) => block.decls.push(self.typeref(name, pos, meta)?),
                (Tok::Eq, _) => {
                    let (source, _) = self.ident()?;
                    self.expect(Tok::ArrowTok)?;
                    let (target, _) = self.ident()?;
                    block.assigns.push(RawAssign {
                        name,
                        source,
                        target,
                        pos,
                    });
                }
                (t, pos) => {
                    return Err(syntax(
                        pos,
                        format!("expected `:` or `=`, found {}", t.describe()),
                    ))
                }
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(block)
    }

    fn typeref(&mut self, name: String, pos: Pos, meta: bool) -> Result<RawDecl, RuleError> {
        let (ty, _) = self.ident()?;
        let mut decl = RawDecl {
            name,
            ty,
            constant: false,
            mm: None,
            potency: None,
            multiplicity: None,
            pos,
        };
        if *self.peek() == Tok::Dollar {
            self.next();
            decl.constant = true;
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if s == "mm" {
                self.next();
                decl.mm = Some(self.int()? as usize);
            } else if let Some(k) = s.strip_prefix("mm").and_then(|k| k.parse::<usize>().ok()) {
                self.next();
                decl.mm = Some(k);
            }
        }
        if *self.peek() == Tok::At {
            let at = self.next().1;
            let min = self.int()?;
            let max = if *self.peek() == Tok::Dash {
                self.next();
                if *self.peek() == Tok::Star {
                    self.next();
                    None
                } else {
                    Some(self.int()?)
                }
            } else {
                Some(min)
            };
            if max.is_some_and(|m| m < min) {
                return Err(syntax(at, "potency max is below min"));
            }
            decl.potency = Some(Potency::new(min, max));
        }
        if *self.peek() == Tok::LBracket {
            let open = self.next().1;
            if !meta {
                return Err(syntax(
                    open,
                    "multiplicities are only allowed in the meta block",
                ));
            }
            let lower = self.int()?;
            self.expect(Tok::DotDot)?;
            let upper = match self.next() {
                (Tok::Int(u), _) => Some(u),
                (Tok::Star, _) => None,
                (Tok::Ident(s), _) if s == "n" => None,
                (t, pos) => {
                    return Err(syntax(
                        pos,
                        format!("expected upper bound, found {}", t.describe()),
                    ))
                }
            };
            self.expect(Tok::RBracket)?;
            if upper.is_some_and(|u| u < lower) {
                return Err(syntax(
                    open,
                    "multiplicity upper bound is below lower bound",
                ));
            }
            decl.multiplicity = Some(Multiplicity::new(lower, upper));
        }
        Ok(decl)
    }
}

pub(crate) fn parse_raw(text: &str) -> Result<RawModule, RuleError> {
    let toks = lex(text)?;
    Parser { toks, at: 0 }.module()
}
