//! Scalar coefficient expressions: numbers, `x`, `y`, `z`, `pi`, `+ - * /`,
//! unary minus, parentheses and `sin`, `cos`, `exp`.
//!
//! ```
//! use feec_core::coefex::parse;
//! let e = parse("sin(pi*x)*cos(pi*z)").unwrap();
//! assert!((e.eval(&[0.5, 0.0, 0.0]) - 1.0).abs() < 1e-15);
//! ```

mod ast;
mod compile;
mod parser;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func, VARIABLES};
pub use compile::Program;
pub use parser::{parse, parse_in_dim};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` at byte {offset} takes 1 argument, got {found}")]
    Arity { name: String, offset: usize, found: usize },

    #[error("variable `{name}` at byte {offset} is not available in {dim} dimensions")]
    Dimension { name: String, offset: usize, dim: usize },
}

impl ExprError {
    pub fn offset(&self) -> usize {
        match self {
            ExprError::Syntax { offset, .. }
            | ExprError::UnknownIdentifier { offset, .. }
            | ExprError::Arity { offset, .. }
            | ExprError::Dimension { offset, .. } => *offset,
        }
    }
}

impl Expr {
    /// IEEE evaluation at `point` (`x = point[0]`, ...).
    pub fn eval(&self, point: &[f64]) -> f64 {
        Program::new(self).eval(point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn literals_and_vars() {
        assert_eq!(parse("2").unwrap(), Expr::Num(2.0));
        assert!(close(parse("x+y").unwrap().eval(&[0.25, 0.5]), 0.75));
        assert!(close(parse("-(x*x)").unwrap().eval(&[2.0, 0.0]), -4.0));
        assert!(close(parse("sin(pi*y)*sin(pi*z)").unwrap().eval(&[0.0, 0.5, 0.5]), 1.0));
        assert!(close(parse("cos(pi*x)*sin(pi*y)").unwrap().eval(&[0.0, 0.5, 0.0]), 1.0));
        assert!(close(parse("1.5e1 - 2E-1").unwrap().eval(&[]), 14.8));
    }

    #[test]
    fn precedence() {
        assert!(close(parse("1 + 2 * 3").unwrap().eval(&[]), 7.0));
        assert!(close(parse("8 / 4 / 2").unwrap().eval(&[]), 1.0));
        assert!(close(parse("2 - 3 - 4").unwrap().eval(&[]), -5.0));
        assert!(close(parse("-2 * 3").unwrap().eval(&[]), -6.0));
        assert!(close(parse("--x").unwrap().eval(&[3.0]), 3.0));
        assert!(close(parse("(1 + 2) * 3").unwrap().eval(&[]), 9.0));
    }

    #[test]
    fn division_by_zero_is_ieee() {
        assert_eq!(parse("1/0").unwrap().eval(&[]), f64::INFINITY);
        assert!(parse("0/0").unwrap().eval(&[]).is_nan());
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse("sin(pi*w)"),
            Err(ExprError::UnknownIdentifier { name: "w".into(), offset: 7 })
        );
        assert!(matches!(parse("sin(x, y)"), Err(ExprError::Arity { found: 2, .. })));
        assert!(matches!(parse("cos()"), Err(ExprError::Arity { found: 0, .. })));
        assert!(matches!(parse("1 +"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("(x"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x y"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("2 $ 3"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_in_dim("x + z", 2), Err(ExprError::Dimension { offset: 4, .. })));
        assert!(parse_in_dim("x + y", 2).is_ok());
    }

    #[test]
    fn display_round_trips() {
        for s in ["-(x*x)", "x - (y - z)", "-x*y", "2 - -3", "sin(pi*x)/(1+exp(-y))", "(x/y)/z", "x/(y/z)"] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }
}
