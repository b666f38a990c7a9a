use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::lexer::{Tok, Token};
use super::QasmError;
use crate::program::{GateKind, GateOp, Param, Program};

/// Largest register size accepted from source.
pub const MAX_REGISTER_SIZE: u64 = 1 << 16;
const MAX_EXPR_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RegKind {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, Copy)]
struct Register {
    kind: RegKind,
    offset: usize,
    size: usize,
}

/// A parsed register operand: whole register or a single indexed bit.
#[derive(Debug, Clone)]
enum Operand {
    Whole(Vec<usize>),
    Bit(usize),
}

impl Operand {
    fn bits(&self) -> Vec<usize> {
        match self {
            Operand::Whole(v) => v.clone(),
            Operand::Bit(b) => vec![*b],
        }
    }
}

/// `scale * symbol + offset`, or a constant when `symbol` is `None`.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    symbol: Option<(String, f64)>,
    offset: f64,
}

impl Affine {
    fn constant(v: f64) -> Affine {
        Affine { symbol: None, offset: v }
    }

    fn into_param(self) -> Param {
        match self.symbol {
            None => Param::Literal(self.offset),
            Some((name, scale)) => Param::Symbol { name, scale, offset: self.offset },
        }
    }
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    registers: BTreeMap<String, Register>,
    program: Program,
}

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Parser {
        Parser { tokens, pos: 0, registers: BTreeMap::new(), program: Program::default() }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, at: &Token, message: impl Into<String>) -> QasmError {
        QasmError::Syntax { line: at.line, col: at.col, message: message.into() }
    }

    fn semantic(&self, at: &Token, message: impl Into<String>) -> QasmError {
        QasmError::Semantic { line: at.line, col: at.col, message: message.into() }
    }

    fn unsupported(&self, at: &Token, construct: impl Into<String>) -> QasmError {
        QasmError::Unsupported { line: at.line, col: at.col, construct: construct.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, QasmError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.syntax(&t, format!("expected {what}, found {}", describe(&t.tok))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(self.syntax(&t, format!("expected {what}, found {}", describe(other)))),
        }
    }

    pub(crate) fn parse(mut self) -> Result<Program, QasmError> {
        self.header()?;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::ParamPragma(names) => {
                    self.next();
                    for name in names {
                        self.declare_param(name, &t)?;
                    }
                }
                Tok::Ident(word) => {
                    let word = word.clone();
                    self.statement(&word, &t)?;
                }
                other => return Err(self.syntax(&t, format!("expected a statement, found {}", describe(other)))),
            }
        }
        Ok(self.program)
    }

    fn header(&mut self) -> Result<(), QasmError> {
        let t = self.peek().clone();
        if t.tok != Tok::Ident("OPENQASM".into()) {
            return Ok(());
        }
        self.next();
        let v = self.next();
        let version = match v.tok {
            Tok::Real(x) => x,
            Tok::Int(x) => x as f64,
            ref other => return Err(self.syntax(&v, format!("expected version number, found {}", describe(other)))),
        };
        if version != 2.0 {
            return Err(self.unsupported(&v, format!("OPENQASM {version:?}")));
        }
        self.expect(Tok::Semicolon, "`;`")?;
        Ok(())
    }

    fn declare_param(&mut self, name: &str, at: &Token) -> Result<(), QasmError> {
        let valid = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid || name == "pi" {
            return Err(self.syntax(at, format!("invalid parameter name `{name}`")));
        }
        if self.program.parameters.iter().any(|p| p == name) {
            return Err(self.semantic(at, format!("parameter `{name}` declared twice")));
        }
        self.program.parameters.push(name.to_string());
        Ok(())
    }

    fn statement(&mut self, word: &str, at: &Token) -> Result<(), QasmError> {
        match word {
            "OPENQASM" => Err(self.syntax(at, "OPENQASM header must come first")),
            "include" => {
                self.next();
                let t = self.next();
                let Tok::Str(path) = &t.tok else {
                    return Err(self.syntax(&t, "expected a quoted include path"));
                };
                if path != "qelib1.inc" {
                    return Err(self.unsupported(&t, format!("include \"{path}\"")));
                }
                self.expect(Tok::Semicolon, "`;`")?;
                Ok(())
            }
            "qreg" | "creg" => self.register(word == "qreg"),
            "measure" => self.measure(),
            "barrier" => self.barrier(),
            "gate" | "opaque" | "if" | "reset" => Err(self.unsupported(at, format!("`{word}` statement"))),
            _ => self.gate_call(word, at),
        }
    }

    fn register(&mut self, quantum: bool) -> Result<(), QasmError> {
        self.next();
        let (name, name_tok) = self.ident("register name")?;
        self.expect(Tok::LBracket, "`[`")?;
        let size_tok = self.next();
        let Tok::Int(size) = size_tok.tok else {
            return Err(self.syntax(&size_tok, "expected an integer register size"));
        };
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::Semicolon, "`;`")?;
        if size == 0 || size > MAX_REGISTER_SIZE {
            return Err(self.semantic(&size_tok, format!("register size {size} outside 1..={MAX_REGISTER_SIZE}")));
        }
        if self.registers.contains_key(&name) || self.program.parameters.contains(&name) {
            return Err(self.semantic(&name_tok, format!("`{name}` already declared")));
        }
        let size = size as usize;
        let (kind, counter) = if quantum {
            (RegKind::Quantum, &mut self.program.n_qubits)
        } else {
            (RegKind::Classical, &mut self.program.n_clbits)
        };
        let offset = *counter;
        *counter += size;
        if *counter as u64 > MAX_REGISTER_SIZE {
            return Err(QasmError::Semantic {
                line: size_tok.line,
                col: size_tok.col,
                message: "total register size exceeds limit".into(),
            });
        }
        self.registers.insert(name, Register { kind, offset, size });
        Ok(())
    }

    fn operand(&mut self, kind: RegKind) -> Result<Operand, QasmError> {
        let (name, at) = self.ident("register operand")?;
        let Some(reg) = self.registers.get(&name).copied() else {
            return Err(self.semantic(&at, format!("undeclared register `{name}`")));
        };
        if reg.kind != kind {
            let want = if kind == RegKind::Quantum { "quantum" } else { "classical" };
            return Err(self.semantic(&at, format!("`{name}` is not a {want} register")));
        }
        if self.peek().tok != Tok::LBracket {
            return Ok(Operand::Whole((reg.offset..reg.offset + reg.size).collect()));
        }
        self.next();
        let idx_tok = self.next();
        let Tok::Int(idx) = idx_tok.tok else {
            return Err(self.syntax(&idx_tok, "expected an integer index"));
        };
        self.expect(Tok::RBracket, "`]`")?;
        if idx >= reg.size as u64 {
            return Err(self.semantic(&idx_tok, format!("index {idx} out of bounds for `{name}[{}]`", reg.size)));
        }
        Ok(Operand::Bit(reg.offset + idx as usize))
    }

    fn operand_list(&mut self) -> Result<Vec<(Operand, Token)>, QasmError> {
        let mut out = Vec::new();
        loop {
            let at = self.peek().clone();
            out.push((self.operand(RegKind::Quantum)?, at));
            if self.peek().tok == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::Semicolon, "`;`")?;
        Ok(out)
    }

    fn measure(&mut self) -> Result<(), QasmError> {
        let at = self.next();
        let q = self.operand(RegKind::Quantum)?;
        self.expect(Tok::Arrow, "`->`")?;
        let c = self.operand(RegKind::Classical)?;
        self.expect(Tok::Semicolon, "`;`")?;
        match (q, c) {
            (Operand::Bit(q), Operand::Bit(c)) => {
                self.program.ops.push(GateOp::measure(q, c));
            }
            (Operand::Whole(qs), Operand::Whole(cs)) if qs.len() == cs.len() => {
                for (q, c) in qs.into_iter().zip(cs) {
                    self.program.ops.push(GateOp::measure(q, c));
                }
            }
            _ => return Err(self.semantic(&at, "measure operands must both be bits or equal-size registers")),
        }
        Ok(())
    }

    fn barrier(&mut self) -> Result<(), QasmError> {
        let at = self.next();
        let mut qubits = Vec::new();
        for (op, _) in self.operand_list()? {
            for q in op.bits() {
                if !qubits.contains(&q) {
                    qubits.push(q);
                }
            }
        }
        if qubits.is_empty() {
            return Err(self.semantic(&at, "barrier without qubits"));
        }
        self.program.ops.push(GateOp::new(GateKind::Barrier, qubits, Vec::new()));
        Ok(())
    }

    fn gate_call(&mut self, name: &str, at: &Token) -> Result<(), QasmError> {
        let kind = match name {
            "U" => Some(GateKind::U),
            "CX" => Some(GateKind::Cx),
            _ => GateKind::from_name(name).filter(|k| k.is_unitary()),
        };
        let Some(kind) = kind else {
            return Err(self.unsupported(at, format!("gate `{name}`")));
        };
        self.next();
        let mut params = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            if self.peek().tok != Tok::RParen {
                loop {
                    params.push(self.expr(0)?.into_param());
                    if self.peek().tok == Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        if params.len() != kind.param_count() {
            return Err(
                self.semantic(at, format!("`{name}` takes {} parameter(s), got {}", kind.param_count(), params.len()))
            );
        }
        let operands = self.operand_list()?;
        let arity = kind.qubit_arity().unwrap_or(1);
        if operands.len() != arity {
            return Err(self.semantic(at, format!("`{name}` takes {arity} qubit(s), got {}", operands.len())));
        }
        let width = operands
            .iter()
            .filter_map(|(o, _)| match o {
                Operand::Whole(v) => Some(v.len()),
                Operand::Bit(_) => None,
            })
            .try_fold(None, |acc: Option<usize>, n| match acc {
                Some(m) if m != n => Err(()),
                _ => Ok(Some(n)),
            })
            .map_err(|_| self.semantic(at, "broadcast registers differ in size"))?;
        let rounds = width.unwrap_or(1);
        for i in 0..rounds {
            let qubits: Vec<usize> = operands
                .iter()
                .map(|(o, _)| match o {
                    Operand::Whole(v) => v[i],
                    Operand::Bit(b) => *b,
                })
                .collect();
            let op = GateOp::new(kind, qubits, params.clone());
            if op.check_shape().is_err() {
                let (_, t) = &operands[operands.len() - 1];
                return Err(self.semantic(t, format!("invalid operands for `{name}`")));
            }
            self.program.ops.push(op);
        }
        Ok(())
    }

    fn expr(&mut self, depth: usize) -> Result<Affine, QasmError> {
        if depth > MAX_EXPR_DEPTH {
            let t = self.peek().clone();
            return Err(self.syntax(&t, "expression nested too deeply"));
        }
        let mut lhs = self.term(depth)?;
        loop {
            let sign = match self.peek().tok {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term(depth)?;
            let at = self.peek().clone();
            lhs = add(lhs, rhs, sign).map_err(|m| self.unsupported(&at, m))?;
        }
    }

    fn term(&mut self, depth: usize) -> Result<Affine, QasmError> {
        let mut lhs = self.unary(depth)?;
        loop {
            let op = self.peek().tok.clone();
            if !matches!(op, Tok::Star | Tok::Slash) {
                return Ok(lhs);
            }
            let at = self.next();
            let rhs = self.unary(depth)?;
            lhs = match op {
                Tok::Star => mul(lhs, rhs),
                _ => div(lhs, rhs),
            }
            .map_err(|m| self.unsupported(&at, m))?;
        }
    }

    fn unary(&mut self, depth: usize) -> Result<Affine, QasmError> {
        if depth > MAX_EXPR_DEPTH {
            let t = self.peek().clone();
            return Err(self.syntax(&t, "expression nested too deeply"));
        }
        match self.peek().tok {
            Tok::Minus => {
                self.next();
                let v = self.unary(depth + 1)?;
                Ok(Affine { symbol: v.symbol.map(|(n, s)| (n, -s)), offset: -v.offset })
            }
            Tok::Plus => {
                self.next();
                self.unary(depth + 1)
            }
            _ => self.atom(depth),
        }
    }

    fn atom(&mut self, depth: usize) -> Result<Affine, QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Int(v) => Ok(Affine::constant(*v as f64)),
            Tok::Real(v) => Ok(Affine::constant(*v)),
            Tok::Ident(name) if name == "pi" => Ok(Affine::constant(core::f64::consts::PI)),
            Tok::Ident(name) => {
                if self.program.parameters.iter().any(|p| p == name) {
                    Ok(Affine { symbol: Some((name.clone(), 1.0)), offset: 0.0 })
                } else if matches!(name.as_str(), "sin" | "cos" | "tan" | "exp" | "ln" | "sqrt") {
                    Err(self.unsupported(&t, format!("function `{name}`")))
                } else {
                    Err(self.semantic(&t, format!("undeclared parameter `{name}`")))
                }
            }
            Tok::LParen => {
                let v = self.expr(depth + 1)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(v)
            }
            Tok::Caret => Err(self.unsupported(&t, "`^` operator")),
            other => Err(self.syntax(&t, format!("expected an expression, found {}", describe(other)))),
        }
    }
}

fn add(a: Affine, b: Affine, sign: f64) -> Result<Affine, String> {
    let symbol = match (a.symbol, b.symbol) {
        (None, None) => None,
        (Some(s), None) => Some(s),
        (None, Some((n, s))) => Some((n, sign * s)),
        (Some((n1, s1)), Some((n2, s2))) if n1 == n2 => Some((n1, s1 + sign * s2)),
        _ => return Err("expression mixing several parameters".into()),
    };
    Ok(Affine { symbol, offset: a.offset + sign * b.offset })
}

fn mul(a: Affine, b: Affine) -> Result<Affine, String> {
    match (&a.symbol, &b.symbol) {
        (Some(_), Some(_)) => Err("non-affine parameter expression".into()),
        (None, _) => Ok(Affine { symbol: b.symbol.map(|(n, s)| (n, a.offset * s)), offset: a.offset * b.offset }),
        (_, None) => Ok(Affine { symbol: a.symbol.map(|(n, s)| (n, s * b.offset)), offset: a.offset * b.offset }),
    }
}

fn div(a: Affine, b: Affine) -> Result<Affine, String> {
    if b.symbol.is_some() {
        return Err("division by a parameter".into());
    }
    if b.offset == 0.0 {
        return Err("division by zero".into());
    }
    Ok(Affine { symbol: a.symbol.map(|(n, s)| (n, s / b.offset)), offset: a.offset / b.offset })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Real(v) => format!("`{v}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::ParamPragma(_) => "parameter pragma".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semicolon => "`;`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::EqEq => "`==`".into(),
        Tok::Eof => "end of input".into(),
    }
}
