//! Textual format for BMDP models.
//!
//! ```text
//! model     := ("bmdp" string?)? typedecl+ initdecl
//! typedecl  := "type" ident "{" actiondecl+ "}"
//! actiondecl:= "action" ident "cost" float "{" outcome+ "}"
//! outcome   := float ":" ident* ";"
//! initdecl  := "init" ident* ";"
//! ```
//!
//! `#` starts a comment running to end of line. Identifiers are
//! `[A-Za-z_][A-Za-z0-9_]*`; floats use decimal or scientific notation.
//! Types may be referenced before their declaration. [`serialize_model`]
//! emits a canonical form (one outcome per line, shortest float literals
//! that parse back bit-identically) and round-trips through
//! [`parse_model`] structurally unchanged.

use crate::model::{
    renormalize_outcomes, ActionSpec, Bmdp, Config, OffspringOutcome, TypeId, TypeSpec,
    PROB_SUM_TOLERANCE,
};
use std::fmt;
use thiserror::Error;

/// Location of a token in the source text. Lines and columns are 1-based;
/// `length` is in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// What went wrong while reading a model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    LexError,
    SyntaxError,
    DuplicateName,
    UnknownType,
    BadProbability,
    BadCost,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::LexError => "lex error",
            ParseErrorKind::SyntaxError => "syntax error",
            ParseErrorKind::DuplicateName => "duplicate name",
            ParseErrorKind::UnknownType => "unknown type",
            ParseErrorKind::BadProbability => "bad probability",
            ParseErrorKind::BadCost => "bad cost",
        };
        f.write_str(s)
    }
}

/// A rejected model file: the first offence found, with its location.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {kind}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(span: SourceSpan, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        ParseError {
            span,
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    Colon,
    Semi,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    span: SourceSpan,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance!();
            }
            continue;
        }
        let span_start = SourceSpan {
            line,
            column: col,
            length: 1,
        };
        match c {
            '{' | '}' | ':' | ';' => {
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    ':' => TokenKind::Colon,
                    _ => TokenKind::Semi,
                };
                tokens.push(Token {
                    kind,
                    span: span_start,
                });
                advance!();
            }
            '"' => {
                advance!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() || chars[i] == '\n' {
                        return Err(ParseError::new(
                            span_start,
                            ParseErrorKind::LexError,
                            "unterminated string",
                        ));
                    }
                    if chars[i] == '"' {
                        advance!();
                        break;
                    }
                    s.push(chars[i]);
                    advance!();
                }
                let span = SourceSpan {
                    length: s.chars().count() + 2,
                    ..span_start
                };
                tokens.push(Token {
                    kind: TokenKind::Str(s),
                    span,
                });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    advance!();
                }
                let span = SourceSpan {
                    length: s.len(),
                    ..span_start
                };
                tokens.push(Token {
                    kind: TokenKind::Ident(s),
                    span,
                });
            }
            _ if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut s = String::new();
                if chars[i] == '-' {
                    s.push('-');
                    advance!();
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    advance!();
                }
                if i < chars.len() && chars[i] == '.' {
                    s.push('.');
                    advance!();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        s.push(chars[i]);
                        advance!();
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    s.push('e');
                    advance!();
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        s.push(chars[i]);
                        advance!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        s.push(chars[i]);
                        advance!();
                    }
                }
                let span = SourceSpan {
                    length: s.len(),
                    ..span_start
                };
                let value: f64 = s.parse().map_err(|_| {
                    ParseError::new(
                        span,
                        ParseErrorKind::LexError,
                        format!("malformed number `{s}`"),
                    )
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    span,
                });
            }
            _ => {
                return Err(ParseError::new(
                    span_start,
                    ParseErrorKind::LexError,
                    format!("unexpected character `{c}`"),
                ));
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: SourceSpan {
            line,
            column: col,
            length: 1,
        },
    });
    Ok(tokens)
}

// Raw declarations carry spans so semantic errors can point at the
// offending token after the syntax pass.
struct RawModel {
    name: Option<String>,
    types: Vec<RawType>,
    init: Vec<(String, SourceSpan)>,
}

struct RawType {
    name: String,
    name_span: SourceSpan,
    actions: Vec<RawAction>,
}

struct RawAction {
    name: String,
    name_span: SourceSpan,
    cost: f64,
    cost_span: SourceSpan,
    outcomes: Vec<RawOutcome>,
}

struct RawOutcome {
    probability: f64,
    prob_span: SourceSpan,
    offspring: Vec<(String, SourceSpan)>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax_error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        let found = match &t.kind {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Number(v) => format!("number `{v:?}`"),
            TokenKind::Str(s) => format!("string \"{s}\""),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Eof => "end of input".into(),
        };
        ParseError::new(
            t.span,
            ParseErrorKind::SyntaxError,
            format!("expected {expected}, found {found}"),
        )
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax_error(&format!("`{kw}`")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                let span = self.peek().span;
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.syntax_error(what)),
        }
    }

    fn expect_number(&mut self, what: &str) -> Result<(f64, SourceSpan), ParseError> {
        match self.peek().kind {
            TokenKind::Number(v) => {
                let span = self.peek().span;
                self.bump();
                Ok((v, span))
            }
            _ => Err(self.syntax_error(what)),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), ParseError> {
        if self.peek().kind == kind {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax_error(what))
        }
    }

    fn model(&mut self) -> Result<RawModel, ParseError> {
        let mut name = None;
        if self.at_keyword("bmdp") {
            self.bump();
            if let TokenKind::Str(s) = &self.peek().kind {
                name = Some(s.clone());
                self.bump();
            }
        }
        let mut types = Vec::new();
        while self.at_keyword("type") {
            types.push(self.typedecl()?);
        }
        if types.is_empty() {
            return Err(self.syntax_error("`type` declaration"));
        }
        let init = self.initdecl()?;
        self.expect(TokenKind::Eof, "end of input")?;
        Ok(RawModel { name, types, init })
    }

    fn typedecl(&mut self) -> Result<RawType, ParseError> {
        self.expect_keyword("type")?;
        let (name, name_span) = self.expect_ident("type name")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut actions = Vec::new();
        while self.at_keyword("action") {
            actions.push(self.actiondecl()?);
        }
        if actions.is_empty() {
            return Err(self.syntax_error("`action` declaration"));
        }
        self.expect(TokenKind::RBrace, "`}` or `action`")?;
        Ok(RawType {
            name,
            name_span,
            actions,
        })
    }

    fn actiondecl(&mut self) -> Result<RawAction, ParseError> {
        self.expect_keyword("action")?;
        let (name, name_span) = self.expect_ident("action name")?;
        self.expect_keyword("cost")?;
        let (cost, cost_span) = self.expect_number("cost value")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut outcomes = Vec::new();
        while matches!(self.peek().kind, TokenKind::Number(_)) {
            outcomes.push(self.outcome()?);
        }
        if outcomes.is_empty() {
            return Err(self.syntax_error("outcome"));
        }
        self.expect(TokenKind::RBrace, "`}` or outcome")?;
        Ok(RawAction {
            name,
            name_span,
            cost,
            cost_span,
            outcomes,
        })
    }

    fn outcome(&mut self) -> Result<RawOutcome, ParseError> {
        let (probability, prob_span) = self.expect_number("probability")?;
        self.expect(TokenKind::Colon, "`:`")?;
        let mut offspring = Vec::new();
        while let TokenKind::Ident(_) = self.peek().kind {
            offspring.push(self.expect_ident("type name")?);
        }
        self.expect(TokenKind::Semi, "`;`")?;
        Ok(RawOutcome {
            probability,
            prob_span,
            offspring,
        })
    }

    fn initdecl(&mut self) -> Result<Vec<(String, SourceSpan)>, ParseError> {
        self.expect_keyword("init")?;
        let mut entities = Vec::new();
        while let TokenKind::Ident(_) = self.peek().kind {
            entities.push(self.expect_ident("type name")?);
        }
        self.expect(TokenKind::Semi, "`;`")?;
        Ok(entities)
    }
}

fn resolve(raw: RawModel) -> Result<Bmdp, ParseError> {
    let mut names: Vec<&str> = Vec::new();
    for ty in &raw.types {
        if names.contains(&ty.name.as_str()) {
            return Err(ParseError::new(
                ty.name_span,
                ParseErrorKind::DuplicateName,
                format!("type `{}` already declared", ty.name),
            ));
        }
        names.push(&ty.name);
    }
    let lookup = |name: &str, span: SourceSpan| -> Result<TypeId, ParseError> {
        names
            .iter()
            .position(|n| *n == name)
            .map(TypeId)
            .ok_or_else(|| {
                ParseError::new(
                    span,
                    ParseErrorKind::UnknownType,
                    format!("unknown type `{name}`"),
                )
            })
    };

    let mut types = Vec::with_capacity(raw.types.len());
    for ty in &raw.types {
        let mut actions = Vec::with_capacity(ty.actions.len());
        for act in &ty.actions {
            if actions.iter().any(|a: &ActionSpec| a.name == act.name) {
                return Err(ParseError::new(
                    act.name_span,
                    ParseErrorKind::DuplicateName,
                    format!(
                        "action `{}` already declared for type `{}`",
                        act.name, ty.name
                    ),
                ));
            }
            if !act.cost.is_finite() || act.cost <= 0.0 {
                return Err(ParseError::new(
                    act.cost_span,
                    ParseErrorKind::BadCost,
                    "cost must be strictly positive",
                ));
            }
            let mut outcomes: Vec<OffspringOutcome> = Vec::with_capacity(act.outcomes.len());
            for out in &act.outcomes {
                if out.probability.is_nan() || out.probability <= 0.0 || out.probability > 1.0 {
                    return Err(ParseError::new(
                        out.prob_span,
                        ParseErrorKind::BadProbability,
                        format!("probability must be in (0, 1], got {}", out.probability),
                    ));
                }
                let mut offspring = Vec::with_capacity(out.offspring.len());
                for (name, span) in &out.offspring {
                    offspring.push(lookup(name, *span)?);
                }
                if outcomes.iter().any(|o| o.offspring == offspring) {
                    return Err(ParseError::new(
                        out.prob_span,
                        ParseErrorKind::DuplicateName,
                        format!("duplicate offspring list within action `{}`", act.name),
                    ));
                }
                outcomes.push(OffspringOutcome {
                    probability: out.probability,
                    offspring,
                });
            }
            let sum: f64 = outcomes.iter().map(|o| o.probability).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(ParseError::new(
                    act.outcomes[0].prob_span,
                    ParseErrorKind::BadProbability,
                    format!("probabilities sum to {sum}"),
                ));
            }
            renormalize_outcomes(&mut outcomes);
            actions.push(ActionSpec {
                name: act.name.clone(),
                cost: act.cost,
                outcomes,
            });
        }
        types.push(TypeSpec {
            name: ty.name.clone(),
            actions,
        });
    }

    let mut init = Vec::with_capacity(raw.init.len());
    for (name, span) in &raw.init {
        init.push(lookup(name, *span)?);
    }

    let model = Bmdp {
        name: raw.name,
        types,
        init: Config::from_entities(init),
    };
    debug_assert!(
        model.validate().is_empty(),
        "parser accepted an invalid model"
    );
    Ok(model)
}

/// Parse a model file. On success the returned model passes
/// [`Bmdp::validate`] with zero violations and preserves declaration order
/// as index order.
pub fn parse_model(text: &str) -> Result<Bmdp, ParseError> {
    let tokens = lex(text)?;
    let raw = Parser { tokens, pos: 0 }.model()?;
    resolve(raw)
}

// `{:?}` on f64 prints the shortest literal that parses back to the same
// bits, so serialize/parse round-trips are exact.
fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

/// Render a valid model in canonical form: header first, one outcome per
/// line, types and actions in index order. `parse_model(serialize_model(m))`
/// is structurally identical to `m`.
pub fn serialize_model(model: &Bmdp) -> String {
    let mut out = String::new();
    if let Some(name) = &model.name {
        out.push_str(&format!("bmdp \"{name}\"\n"));
    }
    for ty in &model.types {
        out.push_str(&format!("type {} {{\n", ty.name));
        for act in &ty.actions {
            out.push_str(&format!(
                "  action {} cost {} {{\n",
                act.name,
                fmt_float(act.cost)
            ));
            for o in &act.outcomes {
                out.push_str(&format!("    {}:", fmt_float(o.probability)));
                for &t in &o.offspring {
                    out.push(' ');
                    out.push_str(model.type_name(t));
                }
                out.push_str(if o.offspring.is_empty() {
                    " ;\n"
                } else {
                    ";\n"
                });
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    out.push_str("init");
    for &t in &model.init.entities {
        out.push(' ');
        out.push_str(model.type_name(t));
    }
    out.push_str(if model.init.is_empty() { " ;\n" } else { ";\n" });
    out
}
