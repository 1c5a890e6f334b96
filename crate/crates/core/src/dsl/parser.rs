use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexer::{lex, Tok, Token};
use super::{Atom, Clause, Diagnostic, Expr, RuleProgram};
use crate::kernel::{Axis, Cmp, Exemption};
use crate::model::{Layer, RoutingDirection};

/// Parses a program, or returns the first diagnostic.
pub fn parse_program(source: &str) -> Result<RuleProgram, Diagnostic> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut prog = p.program()?;
    prog.source = source.into();
    Ok(prog)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn quoted(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| alloc::format!("`{w}`")).collect()
}

const LAYERS: [&str; 5] = ["M0", "VIA0", "M1", "VIA1", "M2"];
const CMPS: [&str; 4] = ["<=", "<", ">=", ">"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, expected: Vec<String>) -> Diagnostic {
        let mut d = Diagnostic::new(t.line, t.column, alloc::format!("unexpected {}", t.tok));
        d.expected = expected;
        d
    }

    fn keyword(&mut self, kw: &str) -> Result<Token, Diagnostic> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Word(w) if w == kw => Ok(self.bump()),
            _ => Err(self.error_at(&t, quoted(&[kw]))),
        }
    }

    fn punct(&mut self, want: Tok) -> Result<Token, Diagnostic> {
        let t = self.peek().clone();
        if t.tok == want {
            Ok(self.bump())
        } else {
            Err(self.error_at(&t, alloc::vec![want.to_string()]))
        }
    }

    /// Consumes one of `choices` and returns its index.
    fn one_of(&mut self, choices: &[&str]) -> Result<usize, Diagnostic> {
        let t = self.peek().clone();
        if let Tok::Word(w) = &t.tok {
            if let Some(i) = choices.iter().position(|c| c == w) {
                self.bump();
                return Ok(i);
            }
        }
        Err(self.error_at(&t, quoted(choices)))
    }

    fn layer(&mut self) -> Result<Layer, Diagnostic> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Word(w) => match w.parse::<Layer>() {
                Ok(l) => {
                    self.bump();
                    Ok(l)
                }
                Err(_) => {
                    let mut d = Diagnostic::new(t.line, t.column, alloc::format!("unknown layer `{w}`"));
                    d.expected = quoted(&LAYERS);
                    Err(d)
                }
            },
            _ => Err(self.error_at(&t, quoted(&LAYERS))),
        }
    }

    fn cmp(&mut self) -> Result<Cmp, Diagnostic> {
        let t = self.peek().clone();
        let c = match t.tok {
            Tok::Le => Cmp::Le,
            Tok::Lt => Cmp::Lt,
            Tok::Ge => Cmp::Ge,
            Tok::Gt => Cmp::Gt,
            _ => return Err(self.error_at(&t, quoted(&CMPS))),
        };
        self.bump();
        Ok(c)
    }

    fn int(&mut self) -> Result<i64, Diagnostic> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.error_at(&t, alloc::vec!["integer".into()])),
        }
    }

    fn signed(&mut self) -> Result<i64, Diagnostic> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            Ok(-self.int()?)
        } else {
            self.int()
        }
    }

    fn program(&mut self) -> Result<RuleProgram, Diagnostic> {
        if self.peek().tok == Tok::Eof {
            let t = self.peek().clone();
            let mut d = Diagnostic::new(t.line, t.column, "empty program: at least one clause is required");
            d.expected = quoted(&["rule"]);
            return Err(d);
        }
        self.keyword("rule")?;
        let t = self.peek().clone();
        let rule_id = match &t.tok {
            Tok::Str(s) if !s.is_empty() => {
                self.bump();
                s.clone()
            }
            _ => return Err(self.error_at(&t, alloc::vec!["rule id string".into()])),
        };
        self.keyword("on")?;
        let layer = self.layer()?;
        self.punct(Tok::LBrace)?;

        let mut clauses = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    if clauses.is_empty() {
                        let mut d = Diagnostic::new(t.line, t.column, "at least one clause is required");
                        d.expected = quoted(&["boundary", "spacing", "enclosure"]);
                        return Err(d);
                    }
                    self.bump();
                    break;
                }
                Tok::Word(w) if w == "boundary" => {
                    self.bump();
                    clauses.push(self.boundary()?);
                }
                Tok::Word(w) if w == "spacing" => {
                    self.bump();
                    clauses.push(self.spacing()?);
                }
                Tok::Word(w) if w == "enclosure" => {
                    self.bump();
                    clauses.push(self.enclosure(layer, &t)?);
                }
                _ => return Err(self.error_at(&t, quoted(&["boundary", "spacing", "enclosure", "}"]))),
            }
        }
        let t = self.peek().clone();
        if t.tok != Tok::Eof {
            return Err(self.error_at(&t, alloc::vec!["end of input".into()]));
        }
        Ok(RuleProgram { source: String::new(), rule_id, layer, clauses })
    }

    fn axis(&mut self) -> Result<Axis, Diagnostic> {
        Ok(if self.one_of(&["x", "y"])? == 0 { Axis::X } else { Axis::Y })
    }

    fn boundary(&mut self) -> Result<Clause, Diagnostic> {
        let axis = self.axis()?;
        let cmp = self.cmp()?;
        let bound = self.expr()?;
        self.punct(Tok::Semi)?;
        Ok(Clause::Boundary { axis, cmp, bound })
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let lead = self.peek().tok == Tok::Minus;
        if lead {
            self.bump();
        }
        let mut terms = alloc::vec![self.term(lead)?];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term(false)?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term(true)?);
                }
                _ => break,
            }
        }
        Ok(Expr { terms })
    }

    fn term(&mut self, negated: bool) -> Result<(bool, Atom), Diagnostic> {
        let t = self.peek().clone();
        let expected = || alloc::vec!["integer".into(), "`max_x`".into(), "`max_y`".into()];
        match &t.tok {
            Tok::Int(v) => {
                self.bump();
                Ok((negated, Atom::Int(*v)))
            }
            Tok::Word(w) if w == "max_x" => {
                self.bump();
                Ok((negated, Atom::MaxX))
            }
            Tok::Word(w) if w == "max_y" => {
                self.bump();
                Ok((negated, Atom::MaxY))
            }
            Tok::Word(w) => {
                let mut d = Diagnostic::new(
                    t.line,
                    t.column,
                    alloc::format!("`{w}` is not allowed in an expression; use integers, max_x, max_y"),
                );
                d.expected = expected();
                Err(d)
            }
            _ => Err(self.error_at(&t, expected())),
        }
    }

    fn spacing(&mut self) -> Result<Clause, Diagnostic> {
        let dir_tok = self.peek().clone();
        let axis = match self.one_of(&["horizontal", "vertical"]) {
            Ok(0) => Axis::X,
            Ok(_) => Axis::Y,
            Err(mut d) => {
                if let Tok::Word(w) = &dir_tok.tok {
                    d.message = alloc::format!("unknown spacing direction `{w}`");
                }
                return Err(d);
            }
        };
        let t = self.peek().clone();
        let cmp = match t.tok {
            Tok::Le => Cmp::Le,
            Tok::Lt => Cmp::Lt,
            _ => return Err(self.error_at(&t, quoted(&["<=", "<"]))),
        };
        self.bump();
        let limit = self.int()?;

        let mut prl = None;
        if matches!(&self.peek().tok, Tok::Word(w) if w == "when") {
            self.bump();
            let at = self.peek().clone();
            let prl_axis = if self.one_of(&["prl_x", "prl_y"])? == 0 { Axis::X } else { Axis::Y };
            if prl_axis != axis.other() {
                let want = alloc::format!("`prl_{}`", axis.other());
                let mut d = Diagnostic::new(
                    at.line,
                    at.column,
                    alloc::format!("PRL of {} spacing is measured on the {} axis", dir_name(axis), axis.other()),
                );
                d.expected = alloc::vec![want];
                return Err(d);
            }
            let c = self.cmp()?;
            let v = self.signed()?;
            prl = Some((c, v));
        }

        let mut exemption = Exemption::SameShape;
        if matches!(&self.peek().tok, Tok::Word(w) if w == "exempt") {
            self.bump();
            exemption = if self.one_of(&["same_shape", "none"])? == 0 { Exemption::SameShape } else { Exemption::None };
        }
        self.punct(Tok::Semi)?;
        Ok(Clause::Spacing { axis, cmp, limit, prl, exemption })
    }

    fn enclosure(&mut self, via: Layer, at: &Token) -> Result<Clause, Diagnostic> {
        if !via.is_via() {
            return Err(Diagnostic::new(
                at.line,
                at.column,
                alloc::format!("enclosure needs a via rule layer, but the rule is on {via}"),
            ));
        }
        self.keyword("by")?;
        let mt = self.peek().clone();
        let metal = self.layer()?;
        if metal.is_via() || metal.routing_direction() == RoutingDirection::None {
            return Err(Diagnostic::new(mt.line, mt.column, alloc::format!("{metal} is not a metal layer")));
        }
        self.keyword("extend")?;
        let et = self.peek().clone();
        let extension = self.int()?;
        let extension = u32::try_from(extension)
            .map_err(|_| Diagnostic::new(et.line, et.column, "extension is out of range"))?;
        self.keyword("along")?;
        let axis = self.axis()?;
        self.punct(Tok::Semi)?;
        Ok(Clause::Enclosure { metal, extension, axis })
    }
}

fn dir_name(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "horizontal",
        Axis::Y => "vertical",
    }
}
