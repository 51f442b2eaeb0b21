//! Parser for the OpenQASM 2.0 subset: a single quantum register, any number
//! of classical registers, and the fixed gate set of [`GateKind`].

use std::collections::HashMap;

use thiserror::Error;

use super::{Gate, GateKind, QuantumProgram};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: unsupported gate `{name}`")]
    UnsupportedGate {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: index {index} out of range for register `{reg}` of size {size}")]
    IndexOutOfRange {
        line: usize,
        col: usize,
        reg: String,
        index: usize,
        size: usize,
    },
    #[error("{line}:{col}: {msg}")]
    Semantic {
        line: usize,
        col: usize,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Int(usize),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if real {
                Tok::Num(text.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("bad number `{text}`"),
                })?)
            } else {
                Tok::Int(text.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("bad integer `{text}`"),
                })?)
            };
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: "unterminated string".into(),
                });
            }
            let s: String = chars[start..j].iter().collect();
            col += j + 1 - i;
            i = j + 1;
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            col += 2;
            out.push(Token {
                tok: Tok::Sym("->"),
                line: tl,
                col: tc,
            });
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            ';' => ";",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '^' => "^",
            '{' => "{",
            '}' => "}",
            _ => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        i += 1;
        col += 1;
        out.push(Token {
            tok: Tok::Sym(sym),
            line: tl,
            col: tc,
        });
    }
    Ok(out)
}

/// A register operand: either one element or the whole register.
enum Operand {
    Indexed(String, usize, (usize, usize)),
    Whole(String, (usize, usize)),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int(&mut self) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected integer"),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        let at = self.here();
        let name = self.ident()?;
        if self.eat("[") {
            let idx = self.int()?;
            self.expect("]")?;
            Ok(Operand::Indexed(name, idx, at))
        } else {
            Ok(Operand::Whole(name, at))
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, ParseError> {
        let mut ops = vec![self.operand()?];
        while self.eat(",") {
            ops.push(self.operand()?);
        }
        Ok(ops)
    }

    fn expr(&mut self) -> Result<f64, ParseError> {
        let mut v = self.term()?;
        loop {
            if self.eat("+") {
                v += self.term()?;
            } else if self.eat("-") {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, ParseError> {
        let mut v = self.power()?;
        loop {
            if self.eat("*") {
                v *= self.power()?;
            } else if self.eat("/") {
                v /= self.power()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn power(&mut self) -> Result<f64, ParseError> {
        let base = self.unary()?;
        if self.eat("^") {
            Ok(base.powf(self.power()?))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<f64, ParseError> {
        if self.eat("-") {
            return Ok(-self.unary()?);
        }
        if self.eat("+") {
            return self.unary();
        }
        match self.next() {
            Some(Tok::Num(x)) => Ok(x),
            Some(Tok::Int(n)) => Ok(n as f64),
            Some(Tok::Sym("(")) => {
                let v = self.expr()?;
                self.expect(")")?;
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                if name == "pi" {
                    return Ok(std::f64::consts::PI);
                }
                let f: fn(f64) -> f64 = match name.as_str() {
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    "tan" => f64::tan,
                    "exp" => f64::exp,
                    "ln" => f64::ln,
                    "sqrt" => f64::sqrt,
                    _ => {
                        self.pos -= 1;
                        return self.err(format!("unknown identifier `{name}` in expression"));
                    }
                };
                self.expect("(")?;
                let v = self.expr()?;
                self.expect(")")?;
                Ok(f(v))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected expression")
            }
        }
    }
}

struct Registers {
    qreg: Option<(String, usize)>,
    cregs: HashMap<String, (usize, usize)>,
    n_clbits: usize,
}

impl Registers {
    fn qubits(&self, op: &Operand) -> Result<Vec<usize>, ParseError> {
        let (name, at) = match op {
            Operand::Indexed(n, _, at) | Operand::Whole(n, at) => (n, *at),
        };
        let Some((qname, size)) = &self.qreg else {
            return Err(ParseError::Semantic {
                line: at.0,
                col: at.1,
                msg: "gate applied before `qreg` declaration".into(),
            });
        };
        if name != qname {
            return Err(ParseError::Semantic {
                line: at.0,
                col: at.1,
                msg: format!("unknown quantum register `{name}`"),
            });
        }
        match op {
            Operand::Indexed(_, idx, _) if idx >= size => Err(ParseError::IndexOutOfRange {
                line: at.0,
                col: at.1,
                reg: name.clone(),
                index: *idx,
                size: *size,
            }),
            Operand::Indexed(_, idx, _) => Ok(vec![*idx]),
            Operand::Whole(..) => Ok((0..*size).collect()),
        }
    }

    fn clbits(&self, op: &Operand) -> Result<Vec<usize>, ParseError> {
        let (name, at) = match op {
            Operand::Indexed(n, _, at) | Operand::Whole(n, at) => (n, *at),
        };
        let Some(&(offset, size)) = self.cregs.get(name) else {
            return Err(ParseError::Semantic {
                line: at.0,
                col: at.1,
                msg: format!("unknown classical register `{name}`"),
            });
        };
        match op {
            Operand::Indexed(_, idx, _) if *idx >= size => Err(ParseError::IndexOutOfRange {
                line: at.0,
                col: at.1,
                reg: name.clone(),
                index: *idx,
                size,
            }),
            Operand::Indexed(_, idx, _) => Ok(vec![offset + idx]),
            Operand::Whole(..) => Ok((offset..offset + size).collect()),
        }
    }
}

/// Parses a program in the supported OpenQASM 2.0 subset.
///
/// The program is named `name`; use [`QuantumProgram::name`] to rename later.
pub fn parse_program(name: &str, text: &str) -> Result<QuantumProgram, ParseError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let mut p = Parser {
        toks,
        pos: 0,
        eof: (last_line, 1),
    };
    let mut regs = Registers {
        qreg: None,
        cregs: HashMap::new(),
        n_clbits: 0,
    };
    let mut gates: Vec<Gate> = Vec::new();
    let mut measured: Vec<bool> = Vec::new();

    while p.peek().is_some() {
        let at = p.here();
        let word = p.ident()?;
        match word.as_str() {
            "OPENQASM" => {
                match p.next() {
                    Some(Tok::Num(_)) | Some(Tok::Int(_)) => {}
                    _ => return p.err("expected version number"),
                }
                p.expect(";")?;
            }
            "include" => {
                match p.next() {
                    Some(Tok::Str(_)) => {}
                    _ => return p.err("expected file name string"),
                }
                p.expect(";")?;
            }
            "qreg" | "creg" => {
                let reg = p.ident()?;
                p.expect("[")?;
                let size = p.int()?;
                p.expect("]")?;
                p.expect(";")?;
                if word == "qreg" {
                    if regs.qreg.is_some() {
                        return Err(ParseError::Semantic {
                            line: at.0,
                            col: at.1,
                            msg: "exactly one quantum register is supported".into(),
                        });
                    }
                    if size == 0 {
                        return Err(ParseError::Semantic {
                            line: at.0,
                            col: at.1,
                            msg: "quantum register must have at least one qubit".into(),
                        });
                    }
                    measured = vec![false; size];
                    regs.qreg = Some((reg, size));
                } else {
                    if regs.cregs.contains_key(&reg) {
                        return Err(ParseError::Semantic {
                            line: at.0,
                            col: at.1,
                            msg: format!("classical register `{reg}` declared twice"),
                        });
                    }
                    regs.cregs.insert(reg, (regs.n_clbits, size));
                    regs.n_clbits += size;
                }
            }
            "gate" | "opaque" | "if" | "reset" => {
                return Err(ParseError::Semantic {
                    line: at.0,
                    col: at.1,
                    msg: format!("`{word}` statements are not supported"),
                })
            }
            "measure" => {
                let q = p.operand()?;
                p.expect("->")?;
                let c = p.operand()?;
                p.expect(";")?;
                let qs = regs.qubits(&q)?;
                let cs = regs.clbits(&c)?;
                if qs.len() != cs.len() {
                    return Err(ParseError::Semantic {
                        line: at.0,
                        col: at.1,
                        msg: "measure register sizes differ".into(),
                    });
                }
                for (q, c) in qs.into_iter().zip(cs) {
                    measured[q] = true;
                    gates.push(Gate {
                        kind: GateKind::Measure,
                        qubits: vec![q],
                        params: vec![],
                        clbit: Some(c),
                        id: 0,
                    });
                }
            }
            "barrier" => {
                let ops = p.operand_list()?;
                p.expect(";")?;
                let mut qs = Vec::new();
                for op in &ops {
                    for q in regs.qubits(op)? {
                        if !qs.contains(&q) {
                            qs.push(q);
                        }
                    }
                }
                gates.push(Gate {
                    kind: GateKind::Barrier,
                    qubits: qs,
                    params: vec![],
                    clbit: None,
                    id: 0,
                });
            }
            _ => {
                let Some(kind) = GateKind::from_name(&word) else {
                    return Err(ParseError::UnsupportedGate {
                        line: at.0,
                        col: at.1,
                        name: word,
                    });
                };
                let mut params = Vec::new();
                if p.eat("(") {
                    if !p.eat(")") {
                        params.push(p.expr()?);
                        while p.eat(",") {
                            params.push(p.expr()?);
                        }
                        p.expect(")")?;
                    }
                }
                if params.len() != kind.n_params() {
                    return Err(ParseError::Semantic {
                        line: at.0,
                        col: at.1,
                        msg: format!(
                            "`{word}` takes {} parameter(s), got {}",
                            kind.n_params(),
                            params.len()
                        ),
                    });
                }
                let ops = p.operand_list()?;
                p.expect(";")?;
                let arity = if kind == GateKind::Cx { 2 } else { 1 };
                if ops.len() != arity {
                    return Err(ParseError::Semantic {
                        line: at.0,
                        col: at.1,
                        msg: format!("`{word}` takes {arity} operand(s), got {}", ops.len()),
                    });
                }
                let expanded: Vec<Vec<usize>> = ops
                    .iter()
                    .map(|o| regs.qubits(o))
                    .collect::<Result<_, _>>()?;
                let width = expanded.iter().map(Vec::len).max().unwrap_or(1);
                if expanded.iter().any(|e| e.len() != 1 && e.len() != width) {
                    return Err(ParseError::Semantic {
                        line: at.0,
                        col: at.1,
                        msg: "mismatched register broadcast".into(),
                    });
                }
                for k in 0..width {
                    let qubits: Vec<usize> = expanded
                        .iter()
                        .map(|e| if e.len() == 1 { e[0] } else { e[k] })
                        .collect();
                    if arity == 2 && qubits[0] == qubits[1] {
                        return Err(ParseError::Semantic {
                            line: at.0,
                            col: at.1,
                            msg: "cx operands must be distinct".into(),
                        });
                    }
                    if let Some(&q) = qubits.iter().find(|&&q| measured[q]) {
                        return Err(ParseError::Semantic {
                            line: at.0,
                            col: at.1,
                            msg: format!("operation on qubit {q} after it was measured"),
                        });
                    }
                    gates.push(Gate {
                        kind,
                        qubits,
                        params: params.clone(),
                        clbit: None,
                        id: 0,
                    });
                }
            }
        }
    }

    let Some((_, n_qubits)) = regs.qreg else {
        let (line, col) = p.eof;
        return Err(ParseError::Semantic {
            line,
            col,
            msg: "program declares no quantum register".into(),
        });
    };
    Ok(QuantumProgram::new(name, n_qubits, regs.n_clbits, gates))
}
