//! Parser for the textual IR.
//!
//! The accepted syntax is the MLIR generic-operation form restricted to the
//! three Olympus operations. Whitespace (including newlines) is free, so both
//! the canonical one-op-per-line form and hand-formatted multi-line ops parse.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use super::{ChannelOp, Direction, KernelOp, OlympusModule, Op, ParamType, PcOp, ValueId};
use crate::layout::Layout;
use crate::resources::ResourceVector;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown operation '{0}'")]
    UnknownOp(String),
    #[error("unknown attribute '{attr}' on {op}")]
    UnknownAttribute { op: String, attr: String },
    #[error("missing attribute '{attr}' on {op}")]
    MissingAttribute { op: String, attr: String },
    #[error("invalid attribute '{attr}': {reason}")]
    BadAttribute { attr: String, reason: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("duplicate value id {0}")]
    DuplicateValue(ValueId),
    #[error("use of undefined value {0}")]
    UndefinedValue(ValueId),
}

/// A parsed module together with the source line of each op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedModule {
    pub module: OlympusModule,
    pub lines: Vec<usize>,
}

pub fn parse_module(text: &str) -> Result<OlympusModule, ParseError> {
    parse_module_with_lines(text).map(|p| p.module)
}

pub fn parse_module_with_lines(text: &str) -> Result<ParsedModule, ParseError> {
    let tokens = Lexer::new(text).tokenize()?;
    Parser {
        tokens,
        pos: 0,
        widths: HashMap::new(),
    }
    .module()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Value(u32),
    Str(String),
    Ident(String),
    Int(i64),
    TypeName(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Value(v) => write!(f, "'%{v}'"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(i) => write!(f, "integer {i}"),
            Tok::TypeName(s) => write!(f, "'!{s}'"),
            Tok::Punct(p) => write!(f, "'{p}'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

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

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                c if c.is_whitespace() => {
                    self.bump();
                    continue;
                }
                '/' => {
                    self.bump();
                    if self.chars.peek() != Some(&'/') {
                        return Err(self.err(line, col, "unexpected '/'"));
                    }
                    self.take_while(|c| c != '\n');
                    continue;
                }
                '%' => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    let v = digits.parse::<u32>().map_err(|_| {
                        self.err(line, col, "expected a numeric value id after '%'")
                    })?;
                    Tok::Value(v)
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None | Some('\n') => {
                                return Err(self.err(line, col, "unterminated string"))
                            }
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some(e @ ('"' | '\\')) => s.push(e),
                                Some('n') => s.push('\n'),
                                _ => return Err(self.err(line, col, "bad escape in string")),
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                '!' => {
                    self.bump();
                    let name = self.take_while(is_ident_char);
                    if name.is_empty() {
                        return Err(self.err(line, col, "expected a type name after '!'"));
                    }
                    Tok::TypeName(name)
                }
                '-' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            Tok::Punct("->")
                        }
                        Some(d) if d.is_ascii_digit() => {
                            let digits = self.take_while(|c| c.is_ascii_digit());
                            let v: i64 = digits
                                .parse()
                                .map_err(|_| self.err(line, col, "integer out of range"))?;
                            Tok::Int(-v)
                        }
                        _ => return Err(self.err(line, col, "unexpected '-'")),
                    }
                }
                c if c.is_ascii_digit() => {
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    Tok::Int(
                        digits
                            .parse()
                            .map_err(|_| self.err(line, col, "integer out of range"))?,
                    )
                }
                c if is_ident_start(c) => Tok::Ident(self.take_while(is_ident_char)),
                _ => {
                    self.bump();
                    let p = match c {
                        '=' => "=",
                        '(' => "(",
                        ')' => ")",
                        '{' => "{",
                        '}' => "}",
                        ',' => ",",
                        ':' => ":",
                        '<' => "<",
                        '>' => ">",
                        _ => {
                            return Err(self.err(line, col, format!("unexpected character '{c}'")))
                        }
                    };
                    Tok::Punct(p)
                }
            };
            out.push(Token { tok, line, col });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum AttrValue {
    Str(String),
    Int(i64),
    Type(String),
    Array(Vec<i64>),
}

struct Attr {
    value: AttrValue,
    line: usize,
    col: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Element width of every channel defined so far.
    widths: HashMap<ValueId, u32>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn unexpected(&self, t: &Token, expected: &str) -> ParseError {
        self.error_at(
            t,
            ParseErrorKind::Syntax(format!("expected {expected}, found {}", t.tok)),
        )
    }

    fn expect(&mut self, p: &'static str) -> PResult<Token> {
        let t = self.next();
        if t.tok == Tok::Punct(p) {
            Ok(t)
        } else {
            Err(self.unexpected(&t, &format!("'{p}'")))
        }
    }

    fn eat(&mut self, p: &'static str) -> bool {
        if self.peek().tok == Tok::Punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn module(mut self) -> PResult<ParsedModule> {
        let mut ops = Vec::new();
        let mut lines = Vec::new();
        while self.peek().tok != Tok::Eof {
            let line = self.peek().line;
            ops.push(self.op()?);
            lines.push(line);
        }
        Ok(ParsedModule {
            module: OlympusModule::new(ops),
            lines,
        })
    }

    fn op(&mut self) -> PResult<Op> {
        let start = self.peek().clone();
        let result = match start.tok {
            Tok::Value(v) => {
                self.next();
                self.expect("=")?;
                Some(ValueId(v))
            }
            _ => None,
        };
        let name_tok = self.next();
        let Tok::Str(name) = &name_tok.tok else {
            return Err(self.unexpected(&name_tok, "a quoted operation name"));
        };
        let name = name.clone();

        self.expect("(")?;
        let mut operands = Vec::new();
        if !self.eat(")") {
            loop {
                let t = self.next();
                match t.tok {
                    Tok::Value(v) => {
                        let v = ValueId(v);
                        if !self.widths.contains_key(&v) {
                            return Err(self.error_at(&t, ParseErrorKind::UndefinedValue(v)));
                        }
                        operands.push((v, t));
                    }
                    _ => return Err(self.unexpected(&t, "a value id")),
                }
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let attrs = if self.peek().tok == Tok::Punct("{") {
            self.attr_dict()?
        } else {
            BTreeMap::new()
        };
        let sig_tok = self.expect(":")?;
        let (arg_types, result_types) = self.function_type()?;

        let mut attrs = Attrs {
            op: name.clone(),
            map: attrs,
            at: start.clone(),
        };
        let op = match name.as_str() {
            "olympus.make_channel" => {
                let Some(result) = result else {
                    return Err(self.error_at(
                        &start,
                        ParseErrorKind::Syntax("make_channel must define a result value".into()),
                    ));
                };
                if !operands.is_empty() || !arg_types.is_empty() {
                    return Err(self.error_at(
                        &sig_tok,
                        ParseErrorKind::TypeMismatch("make_channel takes no operands".into()),
                    ));
                }
                let width = attrs.int_type("encapsulatedType")?;
                if result_types != [width] {
                    return Err(self.error_at(
                        &sig_tok,
                        ParseErrorKind::TypeMismatch(format!(
                            "result type must be !olympus.channel<i{width}>"
                        )),
                    ));
                }
                let param = attrs.string("paramType")?;
                let param_type = ParamType::parse(&param).ok_or_else(|| {
                    attrs.bad(
                        "paramType",
                        format!("'{param}' is not stream, small or complex"),
                    )
                })?;
                let depth = attrs.uint("depth")?;
                let name = match attrs.opt_string("name")? {
                    Some(n) => n,
                    None => format!("ch{}", result.0),
                };
                let layout = match attrs.opt_string("layout")? {
                    Some(text) => {
                        Some(Layout::parse(&text).map_err(|e| attrs.bad("layout", e.to_string()))?)
                    }
                    None => None,
                };
                let valid = attrs.opt_uint("valid")?;
                let plm_instance = attrs.opt_u32("plm_instance")?;
                attrs.finish()?;
                if self.widths.insert(result, width).is_some() {
                    return Err(self.error_at(&start, ParseErrorKind::DuplicateValue(result)));
                }
                Op::Channel(ChannelOp {
                    result,
                    name,
                    element_width: width,
                    param_type,
                    depth,
                    layout,
                    valid,
                    plm_instance,
                })
            }
            "olympus.kernel" => {
                self.no_result(result, &start)?;
                self.check_operand_types(&operands, &arg_types, &sig_tok)?;
                self.no_results(&result_types, &sig_tok)?;
                let callee = attrs.string("callee")?;
                let latency = attrs.uint("latency")?;
                let ii = attrs.uint("ii")?;
                let resources = ResourceVector {
                    ff: attrs.opt_uint("ff")?.unwrap_or(0),
                    lut: attrs.opt_uint("lut")?.unwrap_or(0),
                    bram: attrs.opt_uint("bram")?.unwrap_or(0),
                    uram: attrs.opt_uint("uram")?.unwrap_or(0),
                    dsp: attrs.opt_uint("dsp")?.unwrap_or(0),
                };
                let segments = attrs.array("operand_segment_sizes")?;
                let segment_sizes = match segments.as_slice() {
                    [a, b] if *a >= 0 && *b >= 0 => [*a as u32, *b as u32],
                    _ => {
                        return Err(attrs.bad(
                            "operand_segment_sizes",
                            "expected two non-negative sizes".into(),
                        ))
                    }
                };
                let group = attrs.opt_string("group")?;
                let lane = attrs.opt_u32("lane")?;
                let replica_index = attrs.opt_u32("replica_index")?;
                attrs.finish()?;
                Op::Kernel(KernelOp {
                    callee,
                    latency,
                    ii,
                    resources,
                    operands: operands.iter().map(|(v, _)| *v).collect(),
                    segment_sizes,
                    group,
                    lane,
                    replica_index,
                })
            }
            "olympus.pc" => {
                self.no_result(result, &start)?;
                self.check_operand_types(&operands, &arg_types, &sig_tok)?;
                self.no_results(&result_types, &sig_tok)?;
                if operands.len() != 1 {
                    return Err(self.error_at(
                        &sig_tok,
                        ParseErrorKind::TypeMismatch("olympus.pc takes exactly one channel".into()),
                    ));
                }
                let id = attrs.u32("id")?;
                let dir = attrs.string("direction")?;
                let direction = match dir.as_str() {
                    "read" => Direction::Read,
                    "write" => Direction::Write,
                    _ => {
                        return Err(attrs.bad("direction", format!("'{dir}' is not read or write")))
                    }
                };
                let class = attrs.opt_string("class")?;
                attrs.finish()?;
                Op::Pc(PcOp {
                    channel: operands[0].0,
                    id,
                    direction,
                    class,
                })
            }
            other => {
                return Err(self.error_at(&name_tok, ParseErrorKind::UnknownOp(other.to_string())))
            }
        };
        Ok(op)
    }

    fn no_result(&self, result: Option<ValueId>, at: &Token) -> PResult<()> {
        match result {
            Some(_) => Err(self.error_at(
                at,
                ParseErrorKind::Syntax("operation does not produce a value".into()),
            )),
            None => Ok(()),
        }
    }

    fn no_results(&self, results: &[u32], at: &Token) -> PResult<()> {
        if results.is_empty() {
            Ok(())
        } else {
            Err(self.error_at(
                at,
                ParseErrorKind::TypeMismatch("operation has no results, expected '-> ()'".into()),
            ))
        }
    }

    fn check_operand_types(
        &self,
        operands: &[(ValueId, Token)],
        types: &[u32],
        at: &Token,
    ) -> PResult<()> {
        if operands.len() != types.len() {
            return Err(self.error_at(
                at,
                ParseErrorKind::TypeMismatch(format!(
                    "{} operands but {} types in the signature",
                    operands.len(),
                    types.len()
                )),
            ));
        }
        for ((v, tok), &w) in operands.iter().zip(types) {
            let declared = self.widths[v];
            if declared != w {
                return Err(self.error_at(
                    tok,
                    ParseErrorKind::TypeMismatch(format!(
                        "{v} is !olympus.channel<i{declared}> but the signature says i{w}"
                    )),
                ));
            }
        }
        Ok(())
    }

    fn attr_dict(&mut self) -> PResult<BTreeMap<String, Attr>> {
        self.expect("{")?;
        let mut map = BTreeMap::new();
        loop {
            if self.eat("}") {
                return Ok(map);
            }
            let key_tok = self.next();
            let Tok::Ident(key) = &key_tok.tok else {
                return Err(self.unexpected(&key_tok, "an attribute name or '}'"));
            };
            let key = key.clone();
            self.expect("=")?;
            let value = self.attr_value()?;
            if map
                .insert(
                    key.clone(),
                    Attr {
                        value,
                        line: key_tok.line,
                        col: key_tok.col,
                    },
                )
                .is_some()
            {
                return Err(self.error_at(
                    &key_tok,
                    ParseErrorKind::Syntax(format!("attribute '{key}' given twice")),
                ));
            }
            if !self.eat(",") {
                self.expect("}")?;
                return Ok(map);
            }
        }
    }

    fn attr_value(&mut self) -> PResult<AttrValue> {
        let t = self.next();
        match &t.tok {
            Tok::Str(s) => Ok(AttrValue::Str(s.clone())),
            Tok::Int(i) => {
                let v = *i;
                if self.eat(":") {
                    let ty = self.next();
                    match &ty.tok {
                        Tok::Ident(name) if int_width(name).is_some() => {}
                        _ => return Err(self.unexpected(&ty, "an integer type")),
                    }
                }
                Ok(AttrValue::Int(v))
            }
            Tok::Ident(name) if name == "array" => {
                self.expect("<")?;
                let ty = self.next();
                match &ty.tok {
                    Tok::Ident(name) if int_width(name).is_some() => {}
                    _ => return Err(self.unexpected(&ty, "an integer element type")),
                }
                let mut items = Vec::new();
                if self.eat(":") {
                    loop {
                        let t = self.next();
                        match t.tok {
                            Tok::Int(i) => items.push(i),
                            _ => return Err(self.unexpected(&t, "an integer")),
                        }
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(">")?;
                Ok(AttrValue::Array(items))
            }
            Tok::Ident(name) if int_width(name).is_some() => Ok(AttrValue::Type(name.clone())),
            _ => Err(self.unexpected(&t, "an attribute value")),
        }
    }

    /// `(types) -> (types)` or `(types) -> type`; returns channel widths.
    fn function_type(&mut self) -> PResult<(Vec<u32>, Vec<u32>)> {
        self.expect("(")?;
        let args = self.type_list(")")?;
        self.expect("->")?;
        let results = if self.eat("(") {
            self.type_list(")")?
        } else {
            vec![self.channel_type()?]
        };
        Ok((args, results))
    }

    fn type_list(&mut self, close: &'static str) -> PResult<Vec<u32>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.channel_type()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn channel_type(&mut self) -> PResult<u32> {
        let t = self.next();
        match &t.tok {
            Tok::TypeName(n) if n == "olympus.channel" => {}
            _ => return Err(self.unexpected(&t, "'!olympus.channel'")),
        }
        self.expect("<")?;
        let ty = self.next();
        let width = match &ty.tok {
            Tok::Ident(name) => int_width(name),
            _ => None,
        };
        let Some(width) = width.filter(|w| *w > 0) else {
            return Err(self.unexpected(&ty, "an integer element type like i32"));
        };
        self.expect(">")?;
        Ok(width)
    }
}

fn int_width(name: &str) -> Option<u32> {
    name.strip_prefix('i')?.parse().ok()
}

/// Attribute dictionary of one op being consumed field by field.
struct Attrs {
    op: String,
    map: BTreeMap<String, Attr>,
    at: Token,
}

impl Attrs {
    fn err(&self, line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line, col, kind }
    }

    fn bad(&self, attr: &str, reason: String) -> ParseError {
        let (line, col) = self
            .map
            .get(attr)
            .map(|a| (a.line, a.col))
            .unwrap_or((self.at.line, self.at.col));
        self.err(
            line,
            col,
            ParseErrorKind::BadAttribute {
                attr: attr.to_string(),
                reason,
            },
        )
    }

    fn missing(&self, attr: &str) -> ParseError {
        self.err(
            self.at.line,
            self.at.col,
            ParseErrorKind::MissingAttribute {
                op: self.op.clone(),
                attr: attr.to_string(),
            },
        )
    }

    fn take(&mut self, attr: &str) -> Option<Attr> {
        self.map.remove(attr)
    }

    fn opt_string(&mut self, attr: &str) -> PResult<Option<String>> {
        match self.take(attr) {
            None => Ok(None),
            Some(Attr {
                value: AttrValue::Str(s),
                ..
            }) => Ok(Some(s)),
            Some(a) => Err(self.err(
                a.line,
                a.col,
                ParseErrorKind::BadAttribute {
                    attr: attr.into(),
                    reason: "expected a string".into(),
                },
            )),
        }
    }

    fn string(&mut self, attr: &str) -> PResult<String> {
        self.opt_string(attr)?.ok_or_else(|| self.missing(attr))
    }

    fn opt_uint(&mut self, attr: &str) -> PResult<Option<u64>> {
        match self.take(attr) {
            None => Ok(None),
            Some(Attr {
                value: AttrValue::Int(i),
                ..
            }) if i >= 0 => Ok(Some(i as u64)),
            Some(a) => Err(self.err(
                a.line,
                a.col,
                ParseErrorKind::BadAttribute {
                    attr: attr.into(),
                    reason: "expected a non-negative integer".into(),
                },
            )),
        }
    }

    fn uint(&mut self, attr: &str) -> PResult<u64> {
        self.opt_uint(attr)?.ok_or_else(|| self.missing(attr))
    }

    fn opt_u32(&mut self, attr: &str) -> PResult<Option<u32>> {
        match self.opt_uint(attr)? {
            None => Ok(None),
            Some(v) => u32::try_from(v)
                .map(Some)
                .map_err(|_| self.bad(attr, "value out of range".into())),
        }
    }

    fn u32(&mut self, attr: &str) -> PResult<u32> {
        self.opt_u32(attr)?.ok_or_else(|| self.missing(attr))
    }

    fn int_type(&mut self, attr: &str) -> PResult<u32> {
        match self.take(attr) {
            None => Err(self.missing(attr)),
            Some(Attr {
                value: AttrValue::Type(t),
                line,
                col,
            }) => match int_width(&t) {
                Some(w) if w > 0 => Ok(w),
                _ => Err(self.err(
                    line,
                    col,
                    ParseErrorKind::BadAttribute {
                        attr: attr.into(),
                        reason: "element width must be at least 1".into(),
                    },
                )),
            },
            Some(a) => Err(self.err(
                a.line,
                a.col,
                ParseErrorKind::BadAttribute {
                    attr: attr.into(),
                    reason: "expected an integer type like i32".into(),
                },
            )),
        }
    }

    fn array(&mut self, attr: &str) -> PResult<Vec<i64>> {
        match self.take(attr) {
            None => Err(self.missing(attr)),
            Some(Attr {
                value: AttrValue::Array(v),
                ..
            }) => Ok(v),
            Some(a) => Err(self.err(
                a.line,
                a.col,
                ParseErrorKind::BadAttribute {
                    attr: attr.into(),
                    reason: "expected array<i32: ...>".into(),
                },
            )),
        }
    }

    fn finish(self) -> PResult<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((name, a)) => Err(ParseError {
                line: a.line,
                col: a.col,
                kind: ParseErrorKind::UnknownAttribute {
                    op: self.op,
                    attr: name,
                },
            }),
        }
    }
}
