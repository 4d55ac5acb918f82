// SPDX-License-Identifier: Apache-2.0

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NetKind {
    Wire,
    Reg,
}

/// Inclusive `[msb:lsb]` range; either order is accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Range {
    pub msb: i64,
    pub lsb: i64,
}

impl Range {
    pub fn width(self) -> u32 {
        (self.msb - self.lsb).unsigned_abs() as u32 + 1
    }
}

pub fn range_width(r: Option<Range>) -> u32 {
    r.map_or(1, Range::width)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub kind: NetKind,
    pub range: Option<Range>,
    pub span: Span,
}

impl Port {
    pub fn width(&self) -> u32 {
        range_width(self.range)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Literal {
    /// `None` for unsized literals, which are 32 bits wide.
    pub size: Option<u32>,
    /// Numeric value when it has no x/z digits and fits in 64 bits.
    pub value: Option<u64>,
    pub text: String,
}

impl Literal {
    pub const UNSIZED_WIDTH: u32 = 32;

    pub fn width(&self) -> u32 {
        self.size.unwrap_or(Self::UNSIZED_WIDTH)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    LogicNot,
    Neg,
    Plus,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    Xnor,
    LogicAnd,
    LogicOr,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Shl,
    Shr,
    AShl,
    AShr,
    Eq,
    Neq,
    CaseEq,
    CaseNeq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Ident(String, Span),
    Literal(Literal),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Replicate(u32, Vec<Expr>),
    BitSelect(String, Span, Box<Expr>),
    PartSelect(String, Span, Range),
}

impl Expr {
    /// Identifiers read by the expression, in left-to-right order.
    pub fn idents(&self, out: &mut Vec<(String, Span)>) {
        match self {
            Expr::Ident(n, s) | Expr::PartSelect(n, s, _) => out.push((n.clone(), *s)),
            Expr::Literal(_) => {}
            Expr::Unary(_, a) => a.idents(out),
            Expr::Binary(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
            Expr::Ternary(c, a, b) => {
                c.idents(out);
                a.idents(out);
                b.idents(out);
            }
            Expr::Concat(xs) | Expr::Replicate(_, xs) => xs.iter().for_each(|x| x.idents(out)),
            Expr::BitSelect(n, s, i) => {
                out.push((n.clone(), *s));
                i.idents(out);
            }
        }
    }
}

/// Assignment target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LValue {
    Ident(String, Span),
    BitSelect(String, Span, Box<Expr>),
    PartSelect(String, Span, Range),
    Concat(Vec<LValue>),
}

impl LValue {
    /// Target variable names, left to right.
    pub fn targets(&self, out: &mut Vec<(String, Span)>) {
        match self {
            LValue::Ident(n, s) | LValue::BitSelect(n, s, _) | LValue::PartSelect(n, s, _) => {
                out.push((n.clone(), *s))
            }
            LValue::Concat(xs) => xs.iter().for_each(|x| x.targets(out)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sensitivity {
    /// `@(*)` or `@*`
    Star,
    Signals(Vec<(Option<Edge>, String, Span)>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseItem {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Blocking(LValue, Expr, Span),
    NonBlocking(LValue, Expr, Span),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    Case {
        kind: CaseKind,
        selector: Expr,
        items: Vec<CaseItem>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connections {
    Named(Vec<(String, Option<Expr>, Span)>),
    Positional(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub connections: Connections,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub kind: NetKind,
    pub range: Option<Range>,
    pub names: Vec<(String, Span)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Decl(Declaration),
    Assign(LValue, Expr, Span),
    Always(Sensitivity, Vec<Stmt>, Span),
    Instance(Instance),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerilogModule {
    pub name: String,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
    pub span: Span,
    /// Definitions of the modules this one instantiates (one level deep).
    pub submodules: Vec<VerilogModule>,
}

impl VerilogModule {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn submodule(&self, name: &str) -> Option<&VerilogModule> {
        self.submodules.iter().find(|m| m.name == name)
    }

    pub fn input_bits(&self) -> u64 {
        self.ports
            .iter()
            .filter(|p| p.direction != Direction::Output)
            .map(|p| p.width() as u64)
            .sum()
    }

    pub fn output_bits(&self) -> u64 {
        self.ports
            .iter()
            .filter(|p| p.direction != Direction::Input)
            .map(|p| p.width() as u64)
            .sum()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.items.iter().filter_map(|i| match i {
            Item::Instance(inst) => Some(inst),
            _ => None,
        })
    }
}
