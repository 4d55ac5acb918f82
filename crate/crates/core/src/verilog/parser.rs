// SPDX-License-Identifier: Apache-2.0

use super::lexer::{tokenize, Tok, Token};
use super::syntax::*;
use super::VerilogError;

/// Keywords that are recognized only to be rejected, with the construct named
/// in the error.
const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("initial", "initial"),
    ("function", "function"),
    ("task", "task"),
    ("generate", "generate"),
    ("genvar", "genvar"),
    ("integer", "integer"),
    ("real", "real"),
    ("time", "time"),
    ("parameter", "parameter"),
    ("localparam", "localparam"),
    ("defparam", "defparam"),
    ("for", "for"),
    ("while", "while"),
    ("repeat", "repeat"),
    ("forever", "forever"),
    ("fork", "fork"),
    ("wait", "wait"),
    ("specify", "specify"),
    ("primitive", "primitive"),
    ("supply0", "supply0"),
    ("supply1", "supply1"),
    ("tri", "tri"),
    ("signed", "signed"),
    ("deassign", "procedural continuous assignment"),
    ("force", "force"),
    ("release", "release"),
    ("disable", "disable"),
    ("event", "event"),
];

const RESERVED: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "assign", "always",
    "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default", "posedge",
    "negedge", "or",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word) || UNSUPPORTED_KEYWORDS.iter().any(|(k, _)| *k == word)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, VerilogError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    /// Raises the right error for an unexpected token: unsupported constructs
    /// are named, anything else is a syntax error with the expected set.
    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        let span = self.span();
        match self.peek() {
            Tok::Ident(w) => {
                if let Some((_, construct)) = UNSUPPORTED_KEYWORDS.iter().find(|(k, _)| k == w) {
                    return Err(VerilogError::unsupported(span, *construct));
                }
            }
            Tok::System(name) => {
                return Err(VerilogError::unsupported(span, format!("system task ${name}")))
            }
            Tok::Directive(name) => {
                return Err(VerilogError::unsupported(
                    span,
                    format!("compiler directive `{name}"),
                ))
            }
            Tok::Str => return Err(VerilogError::unsupported(span, "string literal")),
            Tok::Punct("#") => return Err(VerilogError::unsupported(span, "delay or parameter override")),
            Tok::Punct(p @ ("+:" | "-:")) => {
                return Err(VerilogError::unsupported(span, format!("indexed part-select `{p}`")))
            }
            _ => {}
        }
        Err(VerilogError::syntax(
            span,
            self.peek().describe(),
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.unexpected(&[p])
        }
    }

    fn expect_kw(&mut self, k: &'static str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.unexpected(&[k])
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(w) if !is_reserved(&w) => {
                let span = self.span();
                self.advance();
                Ok((w, span))
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn const_int(&mut self) -> PResult<i64> {
        let span = self.span();
        let neg = self.eat_punct("-");
        match self.peek().clone() {
            Tok::Number(Literal { value: Some(v), .. }) if v <= i64::MAX as u64 => {
                self.advance();
                Ok(if neg { -(v as i64) } else { v as i64 })
            }
            Tok::Ident(_) => Err(VerilogError::unsupported(span, "non-literal constant expression")),
            _ => self.unexpected(&["integer constant"]),
        }
    }

    fn range(&mut self) -> PResult<Option<Range>> {
        if !self.eat_punct("[") {
            return Ok(None);
        }
        let msb = self.const_int()?;
        self.expect_punct(":")?;
        let lsb = self.const_int()?;
        self.expect_punct("]")?;
        Ok(Some(Range { msb, lsb }))
    }

    fn source(&mut self) -> PResult<Vec<VerilogModule>> {
        let mut modules = Vec::new();
        while *self.peek() != Tok::Eof {
            if self.is_kw("module") {
                modules.push(self.module()?);
            } else {
                return self.unexpected(&["module"]);
            }
        }
        Ok(modules)
    }

    fn module(&mut self) -> PResult<VerilogModule> {
        let span = self.span();
        self.expect_kw("module")?;
        let (name, _) = self.ident()?;
        if self.is_punct("#") {
            return Err(VerilogError::unsupported(self.span(), "parameter"));
        }
        let mut ports = Vec::new();
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                self.port_list(&mut ports)?;
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let mut items = Vec::new();
        while !self.eat_kw("endmodule") {
            self.item(&mut items)?;
        }
        Ok(VerilogModule {
            name,
            ports,
            items,
            span,
            submodules: Vec::new(),
        })
    }

    fn direction(&mut self) -> Option<Direction> {
        let d = match self.peek() {
            Tok::Ident(w) if w == "input" => Direction::Input,
            Tok::Ident(w) if w == "output" => Direction::Output,
            Tok::Ident(w) if w == "inout" => Direction::Inout,
            _ => return None,
        };
        self.advance();
        Some(d)
    }

    fn port_list(&mut self, ports: &mut Vec<Port>) -> PResult<()> {
        let Some(mut dir) = self.direction() else {
            if matches!(self.peek(), Tok::Ident(w) if !is_reserved(w)) {
                return Err(VerilogError::unsupported(self.span(), "non-ANSI port list"));
            }
            return self.unexpected(&["input", "output", "inout"]);
        };
        loop {
            let kind = if self.eat_kw("reg") {
                NetKind::Reg
            } else {
                self.eat_kw("wire");
                NetKind::Wire
            };
            if self.is_kw("signed") {
                return self.unexpected(&[]);
            }
            let range = self.range()?;
            let (name, span) = self.ident()?;
            ports.push(Port {
                name,
                direction: dir,
                kind,
                range,
                span,
            });
            // Further names share the declaration until a new direction.
            while self.is_punct(",") && matches!(self.peek_at(1), Tok::Ident(w) if !is_reserved(w)) {
                self.advance();
                let (name, span) = self.ident()?;
                ports.push(Port {
                    name,
                    direction: dir,
                    kind,
                    range,
                    span,
                });
            }
            if !self.eat_punct(",") {
                return Ok(());
            }
            match self.direction() {
                Some(d) => dir = d,
                None => return self.unexpected(&["input", "output", "inout", "identifier"]),
            }
        }
    }

    fn item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let span = self.span();
        if self.is_kw("wire") || self.is_kw("reg") {
            let kind = if self.eat_kw("reg") {
                NetKind::Reg
            } else {
                self.advance();
                NetKind::Wire
            };
            let range = self.range()?;
            let mut names = Vec::new();
            let mut inits = Vec::new();
            loop {
                let (name, nspan) = self.ident()?;
                if self.is_punct("[") {
                    return Err(VerilogError::unsupported(self.span(), "memory array"));
                }
                if self.eat_punct("=") {
                    if kind == NetKind::Reg {
                        return Err(VerilogError::unsupported(nspan, "reg initializer"));
                    }
                    let e = self.expr()?;
                    inits.push(Item::Assign(LValue::Ident(name.clone(), nspan), e, nspan));
                }
                names.push((name, nspan));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            items.push(Item::Decl(Declaration { kind, range, names }));
            items.extend(inits);
            return Ok(());
        }
        if self.is_kw("input") || self.is_kw("output") || self.is_kw("inout") {
            return Err(VerilogError::unsupported(span, "port declaration in module body"));
        }
        if self.eat_kw("assign") {
            loop {
                let aspan = self.span();
                let lv = self.lvalue()?;
                self.expect_punct("=")?;
                let e = self.expr()?;
                items.push(Item::Assign(lv, e, aspan));
                if !self.eat_punct(",") {
                    break;
                }
            }
            return self.expect_punct(";");
        }
        if self.eat_kw("always") {
            self.expect_punct("@")?;
            let sens = self.sensitivity()?;
            let body = self.statement()?;
            items.push(Item::Always(sens, body, span));
            return Ok(());
        }
        if matches!(self.peek(), Tok::Ident(w) if !is_reserved(w)) {
            items.push(Item::Instance(self.instance()?));
            return Ok(());
        }
        self.unexpected(&["wire", "reg", "assign", "always", "module instance", "endmodule"])
    }

    fn sensitivity(&mut self) -> PResult<Sensitivity> {
        if self.eat_punct("*") {
            return Ok(Sensitivity::Star);
        }
        self.expect_punct("(")?;
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut signals = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Some(Edge::Pos)
            } else if self.eat_kw("negedge") {
                Some(Edge::Neg)
            } else {
                None
            };
            let (name, span) = self.ident()?;
            signals.push((edge, name, span));
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(Sensitivity::Signals(signals))
    }

    /// One statement; `begin ... end` blocks are flattened into their contents.
    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let span = self.span();
        if self.eat_kw("begin") {
            if self.eat_punct(":") {
                self.ident()?;
            }
            let mut out = Vec::new();
            while !self.eat_kw("end") {
                if *self.peek() == Tok::Eof {
                    return self.unexpected(&["end"]);
                }
                out.extend(self.statement()?);
            }
            return Ok(out);
        }
        if self.eat_punct(";") {
            return Ok(Vec::new());
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_branch = self.statement()?;
            let else_branch = if self.eat_kw("else") {
                self.statement()?
            } else {
                Vec::new()
            };
            return Ok(vec![Stmt::If {
                cond,
                then_branch,
                else_branch,
            }]);
        }
        let case_kind = match self.peek() {
            Tok::Ident(w) if w == "case" => Some(CaseKind::Case),
            Tok::Ident(w) if w == "casez" => Some(CaseKind::Casez),
            Tok::Ident(w) if w == "casex" => Some(CaseKind::Casex),
            _ => None,
        };
        if let Some(kind) = case_kind {
            self.advance();
            self.expect_punct("(")?;
            let selector = self.expr()?;
            self.expect_punct(")")?;
            let mut items = Vec::new();
            while !self.eat_kw("endcase") {
                if self.eat_kw("default") {
                    self.eat_punct(":");
                    let body = self.statement()?;
                    items.push(CaseItem {
                        labels: Vec::new(),
                        body,
                    });
                    continue;
                }
                if *self.peek() == Tok::Eof {
                    return self.unexpected(&["endcase"]);
                }
                let mut labels = vec![self.expr()?];
                while self.eat_punct(",") {
                    labels.push(self.expr()?);
                }
                self.expect_punct(":")?;
                let body = self.statement()?;
                items.push(CaseItem { labels, body });
            }
            return Ok(vec![Stmt::Case {
                kind,
                selector,
                items,
            }]);
        }
        if matches!(self.peek(), Tok::Ident(w) if !is_reserved(w)) || self.is_punct("{") {
            let lv = self.lvalue()?;
            let stmt = if self.eat_punct("=") {
                Stmt::Blocking(lv, self.expr()?, span)
            } else if self.eat_punct("<=") {
                Stmt::NonBlocking(lv, self.expr()?, span)
            } else {
                return self.unexpected(&["=", "<="]);
            };
            self.expect_punct(";")?;
            return Ok(vec![stmt]);
        }
        self.unexpected(&["begin", "if", "case", "identifier", ";"])
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        if self.eat_punct("{") {
            let mut parts = vec![self.lvalue()?];
            while self.eat_punct(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_punct("}")?;
            return Ok(LValue::Concat(parts));
        }
        let (name, span) = self.ident()?;
        match self.select()? {
            None => Ok(LValue::Ident(name, span)),
            Some(Select::Bit(i)) => Ok(LValue::BitSelect(name, span, Box::new(i))),
            Some(Select::Part(r)) => Ok(LValue::PartSelect(name, span, r)),
        }
    }

    fn select(&mut self) -> PResult<Option<Select>> {
        if !self.eat_punct("[") {
            return Ok(None);
        }
        let first = self.expr()?;
        if self.eat_punct(":") {
            let msb = match first {
                Expr::Literal(Literal { value: Some(v), .. }) if v <= i64::MAX as u64 => v as i64,
                _ => {
                    return Err(VerilogError::unsupported(
                        self.span(),
                        "part-select with non-literal bounds",
                    ))
                }
            };
            let lsb = self.const_int()?;
            self.expect_punct("]")?;
            return Ok(Some(Select::Part(Range { msb, lsb })));
        }
        if self.is_punct("+:") || self.is_punct("-:") {
            return self.unexpected(&[]);
        }
        self.expect_punct("]")?;
        Ok(Some(Select::Bit(first)))
    }

    fn instance(&mut self) -> PResult<Instance> {
        let span = self.span();
        let (module, _) = self.ident()?;
        if self.is_punct("#") {
            return Err(VerilogError::unsupported(self.span(), "parameter override"));
        }
        let (name, _) = self.ident()?;
        if self.is_punct("[") {
            return Err(VerilogError::unsupported(self.span(), "instance array"));
        }
        self.expect_punct("(")?;
        let connections = if self.is_punct(".") {
            let mut named = Vec::new();
            loop {
                let cspan = self.span();
                self.expect_punct(".")?;
                let (port, _) = self.ident()?;
                self.expect_punct("(")?;
                let e = if self.is_punct(")") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(")")?;
                named.push((port, e, cspan));
                if !self.eat_punct(",") {
                    break;
                }
            }
            Connections::Named(named)
        } else {
            let mut pos = Vec::new();
            if !self.is_punct(")") {
                pos.push(self.expr()?);
                while self.eat_punct(",") {
                    pos.push(self.expr()?);
                }
            }
            Connections::Positional(pos)
        };
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(Instance {
            module,
            name,
            connections,
            span,
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let Tok::Punct(p) = *self.peek() else { break };
            let Some((op, prec)) = binary_op(p) else { break };
            if prec < min_prec {
                break;
            }
            self.advance();
            // `**` is right-associative; everything else associates left.
            let next = if op == BinaryOp::Pow { prec } else { prec + 1 };
            let rhs = self.binary(next)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Punct("~") => Some(UnaryOp::Not),
            Tok::Punct("!") => Some(UnaryOp::LogicNot),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct("~&") => Some(UnaryOp::RedNand),
            Tok::Punct("~|") => Some(UnaryOp::RedNor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(UnaryOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(lit) => {
                self.advance();
                Ok(Expr::Literal(lit))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.advance();
                let first = self.expr()?;
                if self.is_punct("{") {
                    let count = match first {
                        Expr::Literal(Literal { value: Some(v), .. }) if v >= 1 && v <= u32::MAX as u64 => v as u32,
                        _ => {
                            return Err(VerilogError::unsupported(
                                self.span(),
                                "replication with non-literal count",
                            ))
                        }
                    };
                    self.advance();
                    let mut parts = vec![self.expr()?];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr::Replicate(count, parts));
                }
                let mut parts = vec![first];
                while self.eat_punct(",") {
                    parts.push(self.expr()?);
                }
                self.expect_punct("}")?;
                Ok(Expr::Concat(parts))
            }
            Tok::Ident(w) if !is_reserved(&w) => {
                let (name, span) = self.ident()?;
                if self.is_punct("(") {
                    return Err(VerilogError::unsupported(span, "function call"));
                }
                Ok(match self.select()? {
                    None => Expr::Ident(name, span),
                    Some(Select::Bit(i)) => Expr::BitSelect(name, span, Box::new(i)),
                    Some(Select::Part(r)) => Expr::PartSelect(name, span, r),
                })
            }
            _ => self.unexpected(&["expression"]),
        }
    }
}

enum Select {
    Bit(Expr),
    Part(Range),
}

fn binary_op(p: &str) -> Option<(BinaryOp, u8)> {
    use BinaryOp::*;
    Some(match p {
        "||" => (LogicOr, 1),
        "&&" => (LogicAnd, 2),
        "|" => (Or, 3),
        "^" => (Xor, 4),
        "~^" | "^~" => (Xnor, 4),
        "&" => (And, 5),
        "==" => (Eq, 6),
        "!=" => (Neq, 6),
        "===" => (CaseEq, 6),
        "!==" => (CaseNeq, 6),
        "<" => (Lt, 7),
        "<=" => (Le, 7),
        ">" => (Gt, 7),
        ">=" => (Ge, 7),
        "<<" => (Shl, 8),
        ">>" => (Shr, 8),
        "<<<" => (AShl, 8),
        ">>>" => (AShr, 8),
        "+" => (Add, 9),
        "-" => (Sub, 9),
        "*" => (Mul, 10),
        "/" => (Div, 10),
        "%" => (Mod, 10),
        "**" => (Pow, 11),
        _ => return None,
    })
}

/// Parses every module in `src` without semantic checks.
pub fn parse_modules(src: &str) -> Result<Vec<VerilogModule>, VerilogError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let modules = p.source()?;
    if modules.is_empty() {
        return Err(VerilogError::syntax(p.span(), Tok::Eof.describe(), vec!["module".into()]));
    }
    Ok(modules)
}
