// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::check::bind_connections;
use super::opcodes::OpCode;
use super::syntax::*;
use crate::graphio::{AstGraph, AstNode, Category};

/// Self-determined result width of an expression.
///
/// Arithmetic and bitwise operators take the wider operand, comparisons,
/// logical operators and reductions yield one bit, shifts keep the left
/// operand's width, and concatenation sums its parts.
pub fn expr_width(e: &Expr, width_of: &impl Fn(&str) -> u32) -> u32 {
    use BinaryOp::*;
    match e {
        Expr::Ident(n, _) => width_of(n),
        Expr::Literal(l) => l.width(),
        Expr::Unary(op, a) => match op {
            UnaryOp::Not | UnaryOp::Neg | UnaryOp::Plus => expr_width(a, width_of),
            _ => 1,
        },
        Expr::Binary(op, a, b) => match op {
            LogicAnd | LogicOr | Eq | Neq | CaseEq | CaseNeq | Lt | Le | Gt | Ge => 1,
            Shl | Shr | AShl | AShr | Pow => expr_width(a, width_of),
            And | Or | Xor | Xnor | Add | Sub | Mul | Div | Mod => {
                expr_width(a, width_of).max(expr_width(b, width_of))
            }
        },
        Expr::Ternary(_, a, b) => expr_width(a, width_of).max(expr_width(b, width_of)),
        Expr::Concat(xs) => xs.iter().map(|x| expr_width(x, width_of)).sum(),
        Expr::Replicate(n, xs) => n * xs.iter().map(|x| expr_width(x, width_of)).sum::<u32>(),
        Expr::BitSelect(..) => 1,
        Expr::PartSelect(_, _, r) => r.width(),
    }
}

pub fn lvalue_width(lv: &LValue, width_of: &impl Fn(&str) -> u32) -> u32 {
    match lv {
        LValue::Ident(n, _) => width_of(n),
        LValue::BitSelect(..) => 1,
        LValue::PartSelect(_, _, r) => r.width(),
        LValue::Concat(xs) => xs.iter().map(|x| lvalue_width(x, width_of)).sum(),
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<AstNode>,
    edges: Vec<(usize, usize)>,
    flow: Vec<(usize, usize)>,
}

/// Variables visible in one module body: name to (node, width).
type Scope = BTreeMap<String, (usize, u32)>;

impl Builder {
    fn node(&mut self, parent: Option<usize>, category: Category, op: u8, in_bits: u32, out_bits: u32) -> usize {
        let id = self.nodes.len();
        self.nodes.push(AstNode::new(category, op, in_bits, out_bits));
        if let Some(p) = parent {
            self.edges.push((p, id));
        }
        id
    }

    fn op(&mut self, parent: Option<usize>, op: OpCode, in_bits: u32, out_bits: u32) -> usize {
        self.node(parent, Category::Operation, op.code(), in_bits, out_bits)
    }

    fn declare(&mut self, m: &VerilogModule, parent: usize) -> Scope {
        let mut scope = Scope::new();
        for p in &m.ports {
            let w = p.width();
            let id = self.node(Some(parent), Category::Variable, 0, w, w);
            scope.insert(p.name.clone(), (id, w));
        }
        for item in &m.items {
            if let Item::Decl(d) = item {
                let w = range_width(d.range);
                for (name, _) in &d.names {
                    let id = self.node(Some(parent), Category::Variable, 0, w, w);
                    scope.insert(name.clone(), (id, w));
                }
            }
        }
        scope
    }

    /// Returns the node standing for `e`. Identifiers resolve to their shared
    /// variable node, so expression trees join into a DAG.
    fn expr(&mut self, e: &Expr, scope: &Scope) -> usize {
        let width_of = |n: &str| scope[n].1;
        let w = |x: &Expr| expr_width(x, &width_of);
        let out = w(e);
        match e {
            Expr::Ident(n, _) => scope[n.as_str()].0,
            Expr::Literal(l) => self.node(None, Category::Constant, 0, 0, l.width()),
            Expr::Unary(op, a) => {
                let id = self.op(None, OpCode::unary(*op), w(a), out);
                self.child(id, a, scope);
                id
            }
            Expr::Binary(op, a, b) => {
                let id = self.op(None, OpCode::binary(*op), w(a) + w(b), out);
                self.child(id, a, scope);
                self.child(id, b, scope);
                id
            }
            Expr::Ternary(c, a, b) => {
                let id = self.op(None, OpCode::Ternary, w(c) + w(a) + w(b), out);
                for x in [c, a, b] {
                    self.child(id, x, scope);
                }
                id
            }
            Expr::Concat(xs) | Expr::Replicate(_, xs) => {
                let code = if matches!(e, Expr::Concat(_)) {
                    OpCode::Concat
                } else {
                    OpCode::Replicate
                };
                let id = self.op(None, code, xs.iter().map(w).sum(), out);
                for x in xs {
                    self.child(id, x, scope);
                }
                id
            }
            Expr::BitSelect(n, _, i) => {
                let (var, vw) = scope[n.as_str()];
                let id = self.op(None, OpCode::BitSelect, vw + w(i), 1);
                self.edges.push((id, var));
                self.child(id, i, scope);
                id
            }
            Expr::PartSelect(n, _, r) => {
                let (var, vw) = scope[n.as_str()];
                let id = self.op(None, OpCode::PartSelect, vw, r.width());
                self.edges.push((id, var));
                id
            }
        }
    }

    fn child(&mut self, parent: usize, e: &Expr, scope: &Scope) {
        let c = self.expr(e, scope);
        self.edges.push((parent, c));
    }

    /// Connection node: the right-hand side is its syntactic child and the
    /// assigned variables receive dataflow links. Dynamic indices on the
    /// target are also children; constant ones are attributes of the target.
    fn connection(&mut self, parent: usize, lv: &LValue, rhs: &Expr, scope: &Scope) {
        let width_of = |n: &str| scope[n].1;
        let id = self.node(
            Some(parent),
            Category::Edge,
            0,
            expr_width(rhs, &width_of),
            lvalue_width(lv, &width_of),
        );
        self.child(id, rhs, scope);
        self.lvalue_indices(id, lv, scope);
        self.flow_to(id, lv, scope);
    }

    fn lvalue_indices(&mut self, id: usize, lv: &LValue, scope: &Scope) {
        match lv {
            LValue::BitSelect(_, _, i) if !matches!(**i, Expr::Literal(_)) => {
                self.child(id, i, scope)
            }
            LValue::Concat(xs) => xs.iter().for_each(|x| self.lvalue_indices(id, x, scope)),
            _ => {}
        }
    }

    fn flow_to(&mut self, id: usize, lv: &LValue, scope: &Scope) {
        let mut targets = Vec::new();
        lv.targets(&mut targets);
        for (name, _) in targets {
            self.flow.push((id, scope[name.as_str()].0));
        }
    }

    fn stmts(&mut self, parent: usize, body: &[Stmt], scope: &Scope) {
        let width_of = |n: &str| scope[n].1;
        for s in body {
            match s {
                Stmt::Blocking(lv, e, _) | Stmt::NonBlocking(lv, e, _) => {
                    self.connection(parent, lv, e, scope)
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    let id = self.op(Some(parent), OpCode::If, expr_width(cond, &width_of), 0);
                    self.child(id, cond, scope);
                    self.stmts(id, then_branch, scope);
                    self.stmts(id, else_branch, scope);
                }
                Stmt::Case {
                    kind,
                    selector,
                    items,
                } => {
                    let sw = expr_width(selector, &width_of);
                    let id = self.op(Some(parent), OpCode::case(*kind), sw, 0);
                    self.child(id, selector, scope);
                    for item in items {
                        let item_id = if item.labels.is_empty() {
                            self.op(Some(id), OpCode::DefaultItem, 0, 0)
                        } else {
                            let lw = item.labels.iter().map(|l| expr_width(l, &width_of)).sum();
                            self.op(Some(id), OpCode::CaseItem, lw, 0)
                        };
                        for l in &item.labels {
                            self.child(item_id, l, scope);
                        }
                        self.stmts(item_id, &item.body, scope);
                    }
                }
            }
        }
    }

    fn items(&mut self, parent: usize, m: &VerilogModule, scope: &Scope, top: &VerilogModule) {
        for item in &m.items {
            match item {
                Item::Decl(_) => {}
                Item::Assign(lv, e, _) => self.connection(parent, lv, e, scope),
                Item::Always(sens, body, _) => {
                    let id = self.node(Some(parent), Category::Edge, 0, 0, 0);
                    if let Sensitivity::Signals(sigs) = sens {
                        for (edge, name, _) in sigs {
                            let (var, w) = scope[name.as_str()];
                            match edge {
                                Some(e) => {
                                    let op = self.op(Some(id), OpCode::edge(*e), w, w);
                                    self.edges.push((op, var));
                                }
                                None => self.edges.push((id, var)),
                            }
                        }
                    }
                    self.stmts(id, body, scope);
                }
                Item::Instance(inst) => self.instance(parent, inst, scope, top),
            }
        }
    }

    /// Inlines one level of hierarchy under an instance node.
    fn instance(&mut self, parent: usize, inst: &Instance, outer: &Scope, top: &VerilogModule) {
        let def = top
            .submodule(&inst.module)
            .expect("resolved modules carry their instantiated definitions");
        let id = self.op(
            Some(parent),
            OpCode::Instance,
            def.input_bits() as u32,
            def.output_bits() as u32,
        );
        let inner = self.declare(def, id);
        self.items(id, def, &inner, top);
        let outer_width = |n: &str| outer[n].1;
        let bound = bind_connections(inst, def).expect("connections checked during resolution");
        for (port, expr) in bound {
            let Some(expr) = expr else { continue };
            let (port_var, pw) = inner[port.name.as_str()];
            let ew = expr_width(expr, &outer_width);
            match port.direction {
                Direction::Input => {
                    let c = self.node(Some(id), Category::Edge, 0, ew, pw);
                    self.child(c, expr, outer);
                    self.flow.push((c, port_var));
                }
                Direction::Output | Direction::Inout => {
                    let lv = super::check::expr_as_lvalue(expr)
                        .expect("output connections checked during resolution");
                    let c = self.node(Some(id), Category::Edge, 0, pw, ew);
                    if port.direction == Direction::Inout {
                        self.child(c, expr, outer);
                        self.flow.push((c, port_var));
                    }
                    self.edges.push((c, port_var));
                    self.flow_to(c, &lv, outer);
                }
            }
        }
    }
}

/// Builds the syntax graph of a resolved module. The design id is the module
/// name.
pub fn to_ast_graph(m: &VerilogModule) -> AstGraph {
    let mut b = Builder::default();
    let root = b.node(
        None,
        Category::Root,
        0,
        m.input_bits() as u32,
        m.output_bits() as u32,
    );
    let scope = b.declare(m, root);
    b.items(root, m, &scope, m);
    AstGraph {
        design_id: m.name.clone(),
        nodes: b.nodes,
        edges: b.edges,
        flow: b.flow,
    }
}
