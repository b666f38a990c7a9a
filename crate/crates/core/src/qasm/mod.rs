//! OpenQASM 2.0 subset frontend.
//!
//! Accepted: the `OPENQASM 2.0;` header, `include "qelib1.inc";` (a marker,
//! nothing is read), `qreg`/`creg`, applications of `u rz sx x h cx cz swap`
//! (plus the `U`/`CX` builtins), `measure` and `barrier`, with register
//! broadcasting. Symbolic parameters are declared with a `// @param name`
//! comment and may appear in angles as affine expressions. Registers are
//! flattened in declaration order. Everything else is rejected with a
//! positioned error.

mod lexer;
mod parser;

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use crate::hardware::HardwareModel;
use crate::program::{GateKind, Param, Program};
use crate::transpile::decompose::lowerable;

pub use parser::MAX_REGISTER_SIZE;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QasmError {
    #[error("lexical error at {line}:{col}: {message}")]
    Lex { line: usize, col: usize, message: String },
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unsupported feature at {line}:{col}: {construct}")]
    Unsupported { line: usize, col: usize, construct: String },
    #[error("semantic error at {line}:{col}: {message}")]
    Semantic { line: usize, col: usize, message: String },
}

impl QasmError {
    /// 1-based `(line, column)` of the offending token.
    pub fn position(&self) -> (usize, usize) {
        match self {
            QasmError::Lex { line, col, .. }
            | QasmError::Syntax { line, col, .. }
            | QasmError::Unsupported { line, col, .. }
            | QasmError::Semantic { line, col, .. } => (*line, *col),
        }
    }
}

pub fn parse_qasm2(text: &str) -> Result<Program, QasmError> {
    let tokens = lexer::tokenize(text)?;
    parser::Parser::new(tokens).parse()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramValidationError {
    #[error("program needs {needed} qubits but the model has {available}")]
    TooManyQubits { needed: usize, available: usize },
    #[error("gate `{0}` cannot be lowered to the model basis")]
    Unlowerable(GateKind),
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// Accepts `program` for `model` when it fits and every gate kind lowers to
/// the model's basis. Basis membership itself is not required here.
pub fn validate_program(program: Program, model: &HardwareModel) -> Result<Program, ProgramValidationError> {
    program.check().map_err(ProgramValidationError::Malformed)?;
    if program.n_qubits > model.n_qubits() {
        return Err(ProgramValidationError::TooManyQubits { needed: program.n_qubits, available: model.n_qubits() });
    }
    if let Some(op) = program.ops.iter().find(|op| !lowerable(op.kind, &model.basis_gates)) {
        return Err(ProgramValidationError::Unlowerable(op.kind));
    }
    Ok(program)
}

fn fmt_param(out: &mut String, p: &Param) {
    match p {
        Param::Literal(v) => {
            let _ = write!(out, "{v:?}");
        }
        Param::Symbol { name, scale, offset } => {
            if *scale == 1.0 {
                out.push_str(name);
            } else {
                let _ = write!(out, "{name}*{scale:?}");
            }
            if *offset != 0.0 {
                let _ = write!(out, " + {offset:?}");
            }
        }
    }
}

/// Emits `program` as OpenQASM 2.0 over a single `q`/`c` register pair.
/// The output reparses to a structurally equal program.
pub fn emit_qasm2(program: &Program) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if !program.parameters.is_empty() {
        out.push_str("// @param");
        for p in &program.parameters {
            out.push(' ');
            out.push_str(p);
        }
        out.push('\n');
    }
    if program.n_qubits > 0 {
        let _ = writeln!(out, "qreg q[{}];", program.n_qubits);
    }
    if program.n_clbits > 0 {
        let _ = writeln!(out, "creg c[{}];", program.n_clbits);
    }
    for op in &program.ops {
        if op.kind == GateKind::Measure {
            let _ = writeln!(out, "measure q[{}] -> c[{}];", op.qubits[0], op.clbits[0]);
            continue;
        }
        out.push_str(op.kind.name());
        if !op.params.is_empty() {
            out.push('(');
            for (i, p) in op.params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_param(&mut out, p);
            }
            out.push(')');
        }
        let operands: alloc::vec::Vec<String> = op.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let _ = writeln!(out, " {};", operands.join(","));
    }
    out
}
