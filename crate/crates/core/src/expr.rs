//! Guard and update expression language.
//!
//! Guards are conjunctions of clauses; a clause is a disjunction of literals.
//! A literal compares two terms (`c >= -90.0`, `c >= last_time`), tests a
//! boolean variable (`first`, `!first`), or is a boolean constant. Updates are
//! simultaneous assignments `var := term`. Terms are the channel value `c`,
//! a variable name, or a literal constant.

use std::collections::BTreeMap;
use std::fmt;

use crate::value::{Value, ValueType};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// The incoming channel value, written `c`.
    Chan,
    Var(String),
    IntLit(i64),
    FloatLit(f64),
    BoolLit(bool),
}

impl Term {
    pub fn eval(&self, vars: &BTreeMap<String, Value>, chan: Option<Value>) -> Result<Value> {
        match self {
            Term::Chan => chan
                .ok_or_else(|| Error::Type("`c` is not available on a unit channel".to_string())),
            Term::Var(name) => vars
                .get(name)
                .copied()
                .ok_or_else(|| Error::Type(format!("undeclared variable `{name}`"))),
            Term::IntLit(i) => Ok(Value::Int(*i)),
            Term::FloatLit(x) => Ok(Value::Float(*x)),
            Term::BoolLit(b) => Ok(Value::Bool(*b)),
        }
    }

    /// Static type, given the channel type (None on unit channels) and the
    /// declared variable types.
    pub fn check_type(
        &self,
        chan_ty: Option<ValueType>,
        vars: &BTreeMap<String, ValueType>,
    ) -> Result<ValueType> {
        match self {
            Term::Chan => chan_ty.ok_or_else(|| {
                Error::Type("`c` cannot be used in expressions on a unit channel".to_string())
            }),
            Term::Var(name) => vars
                .get(name)
                .copied()
                .ok_or_else(|| Error::Type(format!("undeclared variable `{name}`"))),
            Term::IntLit(_) => Ok(ValueType::Int),
            Term::FloatLit(_) => Ok(ValueType::Float),
            Term::BoolLit(_) => Ok(ValueType::Bool),
        }
    }

    /// Constant value, if the term is a literal.
    pub fn constant(&self) -> Option<Value> {
        match self {
            Term::IntLit(i) => Some(Value::Int(*i)),
            Term::FloatLit(x) => Some(Value::Float(*x)),
            Term::BoolLit(b) => Some(Value::Bool(*b)),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Chan => f.write_str("c"),
            Term::Var(name) => f.write_str(name),
            Term::IntLit(i) => write!(f, "{i}"),
            Term::FloatLit(x) => write!(f, "{x:?}"),
            Term::BoolLit(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        };
        f.write_str(s)
    }
}

/// One disjunct of a clause.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Cmp {
        lhs: Term,
        op: CmpOp,
        rhs: Term,
    },
    /// Boolean variable test, possibly negated.
    BoolVar {
        name: String,
        negated: bool,
    },
    Const(bool),
}

impl Literal {
    pub fn eval(&self, vars: &BTreeMap<String, Value>, chan: Option<Value>) -> Result<bool> {
        match self {
            Literal::Cmp { lhs, op, rhs } => {
                let l = lhs.eval(vars, chan)?;
                let r = rhs.eval(vars, chan)?;
                compare(l, r, *op)
            }
            Literal::BoolVar { name, negated } => {
                let v = Term::Var(name.clone()).eval(vars, chan)?.as_bool()?;
                Ok(v != *negated)
            }
            Literal::Const(b) => Ok(*b),
        }
    }

    fn check_types(
        &self,
        chan_ty: Option<ValueType>,
        vars: &BTreeMap<String, ValueType>,
    ) -> Result<()> {
        match self {
            Literal::Cmp { lhs, op, rhs } => {
                let lt = lhs.check_type(chan_ty, vars)?;
                let rt = rhs.check_type(chan_ty, vars)?;
                let numeric = |t: ValueType| matches!(t, ValueType::Int | ValueType::Float);
                let bool_eq = lt == ValueType::Bool
                    && rt == ValueType::Bool
                    && matches!(op, CmpOp::Eq | CmpOp::Ne);
                if (numeric(lt) && numeric(rt)) || bool_eq {
                    Ok(())
                } else {
                    Err(Error::Type(format!(
                        "cannot compare {lt} with {rt} using `{op}`"
                    )))
                }
            }
            Literal::BoolVar { name, .. } => match vars.get(name) {
                Some(ValueType::Bool) => Ok(()),
                Some(t) => Err(Error::Type(format!(
                    "`{name}` used as a boolean but has type {t}"
                ))),
                None => Err(Error::Type(format!("undeclared variable `{name}`"))),
            },
            Literal::Const(_) => Ok(()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Cmp { lhs, op, rhs } => write!(f, "{lhs} {op} {rhs}"),
            Literal::BoolVar { name, negated } => {
                if *negated {
                    write!(f, "!{name}")
                } else {
                    f.write_str(name)
                }
            }
            Literal::Const(b) => write!(f, "{b}"),
        }
    }
}

/// Disjunction of literals; one conjunct of a guard.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause(pub Vec<Literal>);

impl Clause {
    pub fn eval(&self, vars: &BTreeMap<String, Value>, chan: Option<Value>) -> Result<bool> {
        for lit in &self.0 {
            if lit.eval(vars, chan)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn check_types(
        &self,
        chan_ty: Option<ValueType>,
        vars: &BTreeMap<String, ValueType>,
    ) -> Result<()> {
        self.0.iter().try_for_each(|l| l.check_types(chan_ty, vars))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for lit in &self.0 {
            if !first {
                f.write_str(" || ")?;
            }
            first = false;
            write!(f, "{lit}")?;
        }
        Ok(())
    }
}

/// Numeric values compare after widening to f64 when types are mixed;
/// same-type comparisons are exact.
pub fn compare(l: Value, r: Value, op: CmpOp) -> Result<bool> {
    let ord = match (l, r) {
        (Value::Int(a), Value::Int(b)) => a.cmp(&b),
        (Value::Bool(a), Value::Bool(b)) => {
            if !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                return Err(Error::Type(format!("cannot order booleans with `{op}`")));
            }
            a.cmp(&b)
        }
        (a, b) => {
            let (x, y) = (a.as_f64()?, b.as_f64()?);
            x.partial_cmp(&y)
                .ok_or_else(|| Error::Type("NaN in comparison".to_string()))?
        }
    };
    Ok(op.holds(ord))
}

// --- parsing ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(i64),
    Float(f64),
    Op(CmpOp),
    Assign,
    OrOr,
    Bang,
}

fn lex(input: &str) -> Result<Vec<Token>> {
    let err = |msg: String| Error::ExprParse {
        input: input.to_string(),
        message: msg,
    };
    let mut toks = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        match ch {
            ' ' | '\t' => i += 1,
            '<' | '>' => {
                let wide = bytes.get(i + 1) == Some(&b'=');
                toks.push(Token::Op(match (ch, wide) {
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('>', true) => CmpOp::Ge,
                    _ => CmpOp::Gt,
                }));
                i += if wide { 2 } else { 1 };
            }
            '=' => {
                // `=` and `==` both mean equality
                i += if bytes.get(i + 1) == Some(&b'=') {
                    2
                } else {
                    1
                };
                toks.push(Token::Op(CmpOp::Eq));
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push(Token::Op(CmpOp::Ne));
                    i += 2;
                } else {
                    toks.push(Token::Bang);
                    i += 1;
                }
            }
            ':' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push(Token::Assign);
                    i += 2;
                } else {
                    return Err(err("expected `:=`".to_string()));
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    toks.push(Token::OrOr);
                    i += 2;
                } else {
                    return Err(err("expected `||`".to_string()));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Token::Ident(input[start..i].to_string()));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let start = i;
                i += 1;
                let mut is_float = false;
                while i < bytes.len() {
                    let b = bytes[i] as char;
                    if b.is_ascii_digit() {
                        i += 1;
                    } else if b == '.' {
                        is_float = true;
                        i += 1;
                    } else if b == 'e' || b == 'E' {
                        is_float = true;
                        i += 1;
                        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                            i += 1;
                        }
                    } else {
                        break;
                    }
                }
                let text = &input[start..i];
                if is_float {
                    toks.push(Token::Float(
                        text.parse()
                            .map_err(|e| err(format!("bad float literal `{text}`: {e}")))?,
                    ));
                } else {
                    toks.push(Token::Int(
                        text.parse()
                            .map_err(|e| err(format!("bad integer literal `{text}`: {e}")))?,
                    ));
                }
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

fn term_from(tok: &Token, input: &str) -> Result<Term> {
    match tok {
        Token::Ident(name) if name == "c" => Ok(Term::Chan),
        Token::Ident(name) if name == "true" => Ok(Term::BoolLit(true)),
        Token::Ident(name) if name == "false" => Ok(Term::BoolLit(false)),
        Token::Ident(name) => Ok(Term::Var(name.clone())),
        Token::Int(i) => Ok(Term::IntLit(*i)),
        Token::Float(x) => Ok(Term::FloatLit(*x)),
        _ => Err(Error::ExprParse {
            input: input.to_string(),
            message: format!("expected a term, got {tok:?}"),
        }),
    }
}

/// Parses one guard conjunct: a `||`-separated disjunction of comparisons
/// and boolean variable tests.
pub fn parse_clause(input: &str) -> Result<Clause> {
    let err = |msg: String| Error::ExprParse {
        input: input.to_string(),
        message: msg,
    };
    let toks = lex(input)?;
    if toks.is_empty() {
        return Err(err("empty guard atom".to_string()));
    }
    let mut lits = Vec::new();
    for group in toks.split(|t| *t == Token::OrOr) {
        let lit = match group {
            [Token::Bang, Token::Ident(name)] if name != "c" => Literal::BoolVar {
                name: name.clone(),
                negated: true,
            },
            [Token::Ident(name)] if name == "true" => Literal::Const(true),
            [Token::Ident(name)] if name == "false" => Literal::Const(false),
            [Token::Ident(name)] if name != "c" => Literal::BoolVar {
                name: name.clone(),
                negated: false,
            },
            [lhs, Token::Op(op), rhs] => Literal::Cmp {
                lhs: term_from(lhs, input)?,
                op: *op,
                rhs: term_from(rhs, input)?,
            },
            [] => return Err(err("empty disjunct".to_string())),
            _ => {
                return Err(err(
                    "expected `term op term` or a boolean variable".to_string()
                ))
            }
        };
        lits.push(lit);
    }
    Ok(Clause(lits))
}

/// Parses one update assignment `var := term`.
pub fn parse_assignment(input: &str) -> Result<(String, Term)> {
    let err = |msg: String| Error::ExprParse {
        input: input.to_string(),
        message: msg,
    };
    let toks = lex(input)?;
    match toks.as_slice() {
        [Token::Ident(name), Token::Assign, rhs] => {
            if name == "c" {
                return Err(err("cannot assign to the channel value `c`".to_string()));
            }
            Ok((name.clone(), term_from(rhs, input)?))
        }
        _ => Err(err("expected `var := term`".to_string())),
    }
}
