use super::ast::{BinOp, Expr, Func};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Call(Func),
}

/// Postfix program for repeated evaluation of one expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
}

const INLINE_STACK: usize = 32;

impl Program {
    pub fn new(expr: &Expr) -> Self {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        let mut depth = 0usize;
        let mut cur = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => cur += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => cur -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            depth = depth.max(cur);
        }
        Self { ops, depth }
    }

    /// Evaluate at `point`; variables beyond `point.len()` read as NaN.
    pub fn eval(&self, point: &[f64]) -> f64 {
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0; INLINE_STACK];
            self.run(point, &mut stack)
        } else {
            let mut stack = vec![0.0; self.depth];
            self.run(point, &mut stack)
        }
    }

    fn run(&self, point: &[f64], stack: &mut [f64]) -> f64 {
        let mut sp = 0;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::Var(i) => {
                    stack[sp] = point.get(i).copied().unwrap_or(f64::NAN);
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Call(f) => stack[sp - 1] = f.apply(stack[sp - 1]),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    sp -= 1;
                    let (a, b) = (stack[sp - 1], stack[sp]);
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => a / b,
                    };
                }
            }
        }
        stack[0]
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Pi => ops.push(Op::Const(std::f64::consts::PI)),
        Expr::Var(i) => ops.push(Op::Var(*i)),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
        Expr::Bin(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
            });
        }
    }
}
