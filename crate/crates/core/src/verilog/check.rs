// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::syntax::*;
use super::VerilogError;

#[derive(Clone, Copy)]
struct Signal {
    kind: NetKind,
    direction: Option<Direction>,
    range: Option<Range>,
}

struct Scope<'m> {
    module: &'m VerilogModule,
    signals: BTreeMap<&'m str, Signal>,
}

impl<'m> Scope<'m> {
    fn build(m: &'m VerilogModule) -> Result<Self, VerilogError> {
        let mut signals = BTreeMap::new();
        for p in &m.ports {
            let sig = Signal {
                kind: p.kind,
                direction: Some(p.direction),
                range: p.range,
            };
            if signals.insert(p.name.as_str(), sig).is_some() {
                return Err(VerilogError::semantic(
                    p.span,
                    format!("port `{}` declared twice in module `{}`", p.name, m.name),
                ));
            }
            if p.kind == NetKind::Reg && p.direction != Direction::Output {
                return Err(VerilogError::semantic(
                    p.span,
                    format!("port `{}` cannot be a reg unless it is an output", p.name),
                ));
            }
        }
        for item in &m.items {
            if let Item::Decl(d) = item {
                for (name, span) in &d.names {
                    let sig = Signal {
                        kind: d.kind,
                        direction: None,
                        range: d.range,
                    };
                    if signals.insert(name.as_str(), sig).is_some() {
                        return Err(VerilogError::semantic(
                            *span,
                            format!("`{name}` is already declared"),
                        ));
                    }
                }
            }
        }
        Ok(Self { module: m, signals })
    }

    fn lookup(&self, name: &str, span: Span) -> Result<Signal, VerilogError> {
        self.signals.get(name).copied().ok_or_else(|| {
            VerilogError::semantic(
                span,
                format!("`{name}` is not declared in module `{}`", self.module.name),
            )
        })
    }

    fn check_range(&self, name: &str, span: Span, sel: Range) -> Result<(), VerilogError> {
        let decl = self.lookup(name, span)?.range.unwrap_or(Range { msb: 0, lsb: 0 });
        let (lo, hi) = (decl.msb.min(decl.lsb), decl.msb.max(decl.lsb));
        let inside = |v: i64| v >= lo && v <= hi;
        if !inside(sel.msb) || !inside(sel.lsb) {
            return Err(VerilogError::semantic(
                span,
                format!(
                    "select [{}:{}] outside `{name}` range [{}:{}]",
                    sel.msb, sel.lsb, decl.msb, decl.lsb
                ),
            ));
        }
        if (sel.msb >= sel.lsb) != (decl.msb >= decl.lsb) && sel.msb != sel.lsb {
            return Err(VerilogError::semantic(
                span,
                format!("select [{}:{}] reverses the direction of `{name}`", sel.msb, sel.lsb),
            ));
        }
        Ok(())
    }

    fn expr(&self, e: &Expr) -> Result<(), VerilogError> {
        match e {
            Expr::Ident(n, s) => self.lookup(n, *s).map(|_| ()),
            Expr::Literal(_) => Ok(()),
            Expr::Unary(_, a) => self.expr(a),
            Expr::Binary(_, a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            Expr::Ternary(c, a, b) => {
                self.expr(c)?;
                self.expr(a)?;
                self.expr(b)
            }
            Expr::Concat(xs) | Expr::Replicate(_, xs) => xs.iter().try_for_each(|x| self.expr(x)),
            Expr::BitSelect(n, s, i) => {
                self.lookup(n, *s)?;
                if let Expr::Literal(Literal { value: Some(v), .. }) = **i {
                    let v = i64::try_from(v).unwrap_or(i64::MAX);
                    self.check_range(n, *s, Range { msb: v, lsb: v })?;
                }
                self.expr(i)
            }
            Expr::PartSelect(n, s, r) => self.check_range(n, *s, *r),
        }
    }

    fn lvalue(&self, lv: &LValue, procedural: bool) -> Result<(), VerilogError> {
        match lv {
            LValue::Concat(xs) => return xs.iter().try_for_each(|x| self.lvalue(x, procedural)),
            LValue::BitSelect(_, _, i) => self.expr(i)?,
            LValue::PartSelect(n, s, r) => self.check_range(n, *s, *r)?,
            LValue::Ident(..) => {}
        }
        let mut targets = Vec::new();
        lv.targets(&mut targets);
        for (name, span) in targets {
            let sig = self.lookup(&name, span)?;
            if sig.direction == Some(Direction::Input) {
                return Err(VerilogError::semantic(span, format!("input `{name}` is assigned")));
            }
            match (procedural, sig.kind) {
                (true, NetKind::Wire) => {
                    return Err(VerilogError::semantic(
                        span,
                        format!("procedural assignment to wire `{name}`"),
                    ))
                }
                (false, NetKind::Reg) => {
                    return Err(VerilogError::semantic(
                        span,
                        format!("continuous assignment to reg `{name}`"),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn stmts(&self, body: &[Stmt]) -> Result<(), VerilogError> {
        for s in body {
            match s {
                Stmt::Blocking(lv, e, _) | Stmt::NonBlocking(lv, e, _) => {
                    self.lvalue(lv, true)?;
                    self.expr(e)?;
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.expr(cond)?;
                    self.stmts(then_branch)?;
                    self.stmts(else_branch)?;
                }
                Stmt::Case {
                    selector, items, ..
                } => {
                    self.expr(selector)?;
                    if items.iter().filter(|i| i.labels.is_empty()).count() > 1 {
                        return Err(VerilogError::semantic(
                            Span::default(),
                            "case statement has more than one default",
                        ));
                    }
                    for item in items {
                        item.labels.iter().try_for_each(|l| self.expr(l))?;
                        self.stmts(&item.body)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn instance(
        &self,
        inst: &Instance,
        defs: &BTreeMap<&str, &VerilogModule>,
    ) -> Result<(), VerilogError> {
        let Some(def) = defs.get(inst.module.as_str()) else {
            return Err(VerilogError::semantic(
                inst.span,
                format!("module `{}` is not defined", inst.module),
            ));
        };
        for (port, expr) in bind_connections(inst, def)? {
            let Some(expr) = expr else { continue };
            self.expr(expr)?;
            if port.direction != Direction::Input {
                let lv = expr_as_lvalue(expr).ok_or_else(|| {
                    VerilogError::semantic(
                        inst.span,
                        format!(
                            "output port `{}` of `{}` must connect to a net",
                            port.name, inst.name
                        ),
                    )
                })?;
                self.lvalue(&lv, false)?;
            }
        }
        Ok(())
    }
}

/// Pairs each connected submodule port with its actual expression.
pub(crate) fn bind_connections<'a>(
    inst: &'a Instance,
    def: &'a VerilogModule,
) -> Result<Vec<(&'a Port, Option<&'a Expr>)>, VerilogError> {
    match &inst.connections {
        Connections::Positional(exprs) => {
            if exprs.len() > def.ports.len() {
                return Err(VerilogError::semantic(
                    inst.span,
                    format!(
                        "`{}` has {} ports but {} connections",
                        def.name,
                        def.ports.len(),
                        exprs.len()
                    ),
                ));
            }
            Ok(def.ports.iter().zip(exprs).map(|(p, e)| (p, Some(e))).collect())
        }
        Connections::Named(named) => {
            let mut out: Vec<(&Port, Option<&Expr>)> = Vec::new();
            for (name, e, span) in named {
                let port = def.port(name).ok_or_else(|| {
                    VerilogError::semantic(
                        *span,
                        format!("module `{}` has no port `{name}`", def.name),
                    )
                })?;
                if out.iter().any(|(p, _)| p.name == *name) {
                    return Err(VerilogError::semantic(
                        *span,
                        format!("port `{name}` connected twice"),
                    ));
                }
                out.push((port, e.as_ref()));
            }
            Ok(out)
        }
    }
}

pub(crate) fn expr_as_lvalue(e: &Expr) -> Option<LValue> {
    Some(match e {
        Expr::Ident(n, s) => LValue::Ident(n.clone(), *s),
        Expr::BitSelect(n, s, i) => LValue::BitSelect(n.clone(), *s, i.clone()),
        Expr::PartSelect(n, s, r) => LValue::PartSelect(n.clone(), *s, *r),
        Expr::Concat(xs) => LValue::Concat(xs.iter().map(expr_as_lvalue).collect::<Option<_>>()?),
        _ => return None,
    })
}

fn check_module(
    m: &VerilogModule,
    defs: &BTreeMap<&str, &VerilogModule>,
) -> Result<(), VerilogError> {
    let scope = Scope::build(m)?;
    for item in &m.items {
        match item {
            Item::Decl(_) => {}
            Item::Assign(lv, e, _) => {
                scope.lvalue(lv, false)?;
                scope.expr(e)?;
            }
            Item::Always(sens, body, _) => {
                if let Sensitivity::Signals(sigs) = sens {
                    for (_, n, s) in sigs {
                        scope.lookup(n, *s)?;
                    }
                }
                scope.stmts(body)?;
            }
            Item::Instance(inst) => scope.instance(inst, defs)?,
        }
    }
    Ok(())
}

/// Selects the top module (the named one, else the last declared), checks it
/// and the modules it instantiates, and attaches their definitions.
pub fn resolve(modules: Vec<VerilogModule>, top: Option<&str>) -> Result<VerilogModule, VerilogError> {
    let mut defs: BTreeMap<&str, &VerilogModule> = BTreeMap::new();
    for m in &modules {
        if defs.insert(m.name.as_str(), m).is_some() {
            return Err(VerilogError::semantic(
                m.span,
                format!("module `{}` defined twice", m.name),
            ));
        }
    }
    let top_mod = match top {
        Some(name) => *defs.get(name).ok_or_else(|| {
            VerilogError::semantic(Span::default(), format!("top module `{name}` not found"))
        })?,
        None => modules.last().expect("parser returns at least one module"),
    };
    check_module(top_mod, &defs)?;
    let mut subs: Vec<VerilogModule> = Vec::new();
    for inst in top_mod.instances() {
        if inst.module == top_mod.name {
            return Err(VerilogError::semantic(
                inst.span,
                format!("module `{}` instantiates itself", inst.module),
            ));
        }
        if subs.iter().any(|s| s.name == inst.module) {
            continue;
        }
        let def = defs[inst.module.as_str()];
        if let Some(nested) = def.instances().next() {
            return Err(VerilogError::unsupported(
                nested.span,
                "nested module hierarchy",
            ));
        }
        check_module(def, &defs)?;
        subs.push(def.clone());
    }
    let mut out = top_mod.clone();
    out.submodules = subs;
    Ok(out)
}
