// SPDX-License-Identifier: Apache-2.0

//! Operation codes for operation-category AST nodes.
//!
//! Codes occupy `[1, 100)`. Code 0 is reserved for "not an operation" and
//! code 99 for operators that parse but have no dedicated entry. Codes
//! 49..=98 are unassigned.

use super::syntax::{BinaryOp, CaseKind, Edge, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum OpCode {
    Not = 1,
    And = 2,
    Or = 3,
    Xor = 4,
    Xnor = 5,
    LogicNot = 6,
    LogicAnd = 7,
    LogicOr = 8,
    Add = 9,
    Sub = 10,
    Mul = 11,
    Div = 12,
    Mod = 13,
    Neg = 14,
    Shl = 15,
    Shr = 16,
    AShl = 17,
    AShr = 18,
    Eq = 19,
    Neq = 20,
    CaseEq = 21,
    CaseNeq = 22,
    Lt = 23,
    Le = 24,
    Gt = 25,
    Ge = 26,
    RedAnd = 27,
    RedOr = 28,
    RedXor = 29,
    RedNand = 30,
    RedNor = 31,
    RedXnor = 32,
    Ternary = 33,
    Concat = 34,
    Replicate = 35,
    BitSelect = 36,
    PartSelect = 37,
    If = 38,
    Case = 39,
    Casez = 40,
    Casex = 41,
    CaseItem = 42,
    DefaultItem = 43,
    Posedge = 44,
    Negedge = 45,
    Instance = 46,
    Other = 99,
}

impl OpCode {
    pub const ALL: [OpCode; 47] = [
        OpCode::Not,
        OpCode::And,
        OpCode::Or,
        OpCode::Xor,
        OpCode::Xnor,
        OpCode::LogicNot,
        OpCode::LogicAnd,
        OpCode::LogicOr,
        OpCode::Add,
        OpCode::Sub,
        OpCode::Mul,
        OpCode::Div,
        OpCode::Mod,
        OpCode::Neg,
        OpCode::Shl,
        OpCode::Shr,
        OpCode::AShl,
        OpCode::AShr,
        OpCode::Eq,
        OpCode::Neq,
        OpCode::CaseEq,
        OpCode::CaseNeq,
        OpCode::Lt,
        OpCode::Le,
        OpCode::Gt,
        OpCode::Ge,
        OpCode::RedAnd,
        OpCode::RedOr,
        OpCode::RedXor,
        OpCode::RedNand,
        OpCode::RedNor,
        OpCode::RedXnor,
        OpCode::Ternary,
        OpCode::Concat,
        OpCode::Replicate,
        OpCode::BitSelect,
        OpCode::PartSelect,
        OpCode::If,
        OpCode::Case,
        OpCode::Casez,
        OpCode::Casex,
        OpCode::CaseItem,
        OpCode::DefaultItem,
        OpCode::Posedge,
        OpCode::Negedge,
        OpCode::Instance,
        OpCode::Other,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|o| o.code() == code)
    }

    pub fn is_assigned(code: usize) -> bool {
        u8::try_from(code).ok().and_then(Self::from_code).is_some()
    }

    pub fn unary(op: UnaryOp) -> Self {
        match op {
            UnaryOp::Not => OpCode::Not,
            UnaryOp::LogicNot => OpCode::LogicNot,
            UnaryOp::Neg => OpCode::Neg,
            UnaryOp::Plus => OpCode::Other,
            UnaryOp::RedAnd => OpCode::RedAnd,
            UnaryOp::RedOr => OpCode::RedOr,
            UnaryOp::RedXor => OpCode::RedXor,
            UnaryOp::RedNand => OpCode::RedNand,
            UnaryOp::RedNor => OpCode::RedNor,
            UnaryOp::RedXnor => OpCode::RedXnor,
        }
    }

    pub fn binary(op: BinaryOp) -> Self {
        match op {
            BinaryOp::And => OpCode::And,
            BinaryOp::Or => OpCode::Or,
            BinaryOp::Xor => OpCode::Xor,
            BinaryOp::Xnor => OpCode::Xnor,
            BinaryOp::LogicAnd => OpCode::LogicAnd,
            BinaryOp::LogicOr => OpCode::LogicOr,
            BinaryOp::Add => OpCode::Add,
            BinaryOp::Sub => OpCode::Sub,
            BinaryOp::Mul => OpCode::Mul,
            BinaryOp::Div => OpCode::Div,
            BinaryOp::Mod => OpCode::Mod,
            BinaryOp::Pow => OpCode::Other,
            BinaryOp::Shl => OpCode::Shl,
            BinaryOp::Shr => OpCode::Shr,
            BinaryOp::AShl => OpCode::AShl,
            BinaryOp::AShr => OpCode::AShr,
            BinaryOp::Eq => OpCode::Eq,
            BinaryOp::Neq => OpCode::Neq,
            BinaryOp::CaseEq => OpCode::CaseEq,
            BinaryOp::CaseNeq => OpCode::CaseNeq,
            BinaryOp::Lt => OpCode::Lt,
            BinaryOp::Le => OpCode::Le,
            BinaryOp::Gt => OpCode::Gt,
            BinaryOp::Ge => OpCode::Ge,
        }
    }

    pub fn case(kind: CaseKind) -> Self {
        match kind {
            CaseKind::Case => OpCode::Case,
            CaseKind::Casez => OpCode::Casez,
            CaseKind::Casex => OpCode::Casex,
        }
    }

    pub fn edge(edge: Edge) -> Self {
        match edge {
            Edge::Pos => OpCode::Posedge,
            Edge::Neg => OpCode::Negedge,
        }
    }
}
