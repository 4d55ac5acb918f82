// SPDX-License-Identifier: Apache-2.0

//! Front end for a synthesizable Verilog subset.
//!
//! Supported: ANSI port headers, `wire`/`reg` declarations with constant
//! ranges, continuous `assign`, `always @(*)` and edge-triggered `always`
//! blocks with `if`/`else` and `case`/`casez`/`casex`, the usual unary,
//! binary, reduction and ternary operators, concatenation and replication,
//! bit and part selects, sized and unsized literals, and one level of module
//! instantiation. Anything else is rejected with an error naming the construct.
//!
//! [`to_ast_graph`] lowers a module into an [`AstGraph`](crate::graphio::AstGraph):
//! the module is the root, ports and nets are shared variable nodes, operators
//! and control statements are operation nodes, literals are constants, and
//! assignments, `always` blocks and port connections are edge nodes.

mod check;
mod features;
mod graph;
mod lexer;
mod opcodes;
mod parser;
mod syntax;

use std::fmt;

pub use features::{
    bit_class, encode_nodes, extract_features_108, init_node_encoder, longest_path,
    node_classes, node_feature_encoder, read_features_csv, write_features_csv,
    FeatureVector108, BIT_CAP, BIT_CLASSES, ENCODER_TABLES, FEATURE_DIM, NODE_FEATURE_DIM,
    NUM_CATEGORIES, NUM_OP_CODES, PROJ_DIM,
};
pub use graph::{expr_width, lvalue_width, to_ast_graph};
pub use lexer::{tokenize, Tok, Token};
pub use opcodes::OpCode;
pub use parser::parse_modules;
pub use syntax::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lex,
    Syntax { found: String, expected: Vec<String> },
    /// The named construct is outside the subset.
    Unsupported(String),
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerilogError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl VerilogError {
    pub(crate) fn lex(span: Span, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Lex,
            span,
            message: message.into(),
        }
    }

    pub(crate) fn syntax(span: Span, found: String, expected: Vec<String>) -> Self {
        let message = if expected.is_empty() {
            format!("unexpected {found}")
        } else {
            format!("unexpected {found}, expected one of: {}", expected.join(", "))
        };
        Self {
            kind: ErrorKind::Syntax { found, expected },
            span,
            message,
        }
    }

    pub(crate) fn unsupported(span: Span, construct: impl Into<String>) -> Self {
        let construct = construct.into();
        Self {
            message: format!("unsupported construct: {construct}"),
            kind: ErrorKind::Unsupported(construct),
            span,
        }
    }

    pub(crate) fn semantic(span: Span, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Semantic,
            span,
            message: message.into(),
        }
    }

    /// Stable category name: `lex`, `syntax`, `unsupported` or `semantic`.
    pub fn category(&self) -> &'static str {
        match self.kind {
            ErrorKind::Lex => "lex",
            ErrorKind::Syntax { .. } => "syntax",
            ErrorKind::Unsupported(_) => "unsupported",
            ErrorKind::Semantic => "semantic",
        }
    }
}

impl fmt::Display for VerilogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {} error: {}",
            self.span.line,
            self.span.col,
            self.category(),
            self.message
        )
    }
}

impl std::error::Error for VerilogError {}

/// Parses `src` and returns its last-declared module, checked, with the
/// definitions of the modules it instantiates attached.
pub fn parse(src: &str) -> Result<VerilogModule, VerilogError> {
    parse_with_top(src, None)
}

/// As [`parse`], selecting the top module by name when given.
pub fn parse_with_top(src: &str, top: Option<&str>) -> Result<VerilogModule, VerilogError> {
    check::resolve(parse_modules(src)?, top)
}

#[cfg(test)]
mod tests;
