//! Stratified bottom-up evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Atom, BodyElement, LogicRule, OutputAtom, Program, Real};
use crate::error::{Error, Result};

/// The unique answer set of a program together with its input facts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerSet {
    atoms: BTreeSet<Atom>,
}

impl AnswerSet {
    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn outputs(&self) -> impl Iterator<Item = &OutputAtom> {
        self.atoms.iter().filter_map(|a| match a {
            Atom::Output(o) => Some(o),
            _ => None,
        })
    }
}

impl FromIterator<Atom> for AnswerSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        AnswerSet {
            atoms: iter.into_iter().collect(),
        }
    }
}

/// Most appropriate class read off an answer set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Number of output atoms derived for `class`.
    pub support_count: usize,
    /// Highest confidence among those atoms.
    pub best_confidence: f64,
    /// No output atom was derived; `class` is the fallback.
    pub abstained: bool,
}

/// A program with its strata precomputed, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator<'p> {
    program: &'p Program,
    /// Rule indices per stratum, lowest stratum first, in program order.
    strata: Vec<Vec<usize>>,
}

impl<'p> Evaluator<'p> {
    /// Computes a level mapping over ground head atoms: positive
    /// dependencies may stay in the same stratum, negated ones must be
    /// strictly lower. Fails if negation sits on a cycle.
    pub fn new(program: &'p Program) -> Result<Self> {
        let mut ids: HashMap<&Atom, usize> = HashMap::new();
        for rule in &program.rules {
            let next = ids.len();
            ids.entry(&rule.head).or_insert(next);
        }
        let mut edges: Vec<(usize, usize, usize)> = Vec::new(); // (head, dep, weight)
        for rule in &program.rules {
            let head = ids[&rule.head];
            for element in &rule.body {
                let (atom, weight) = match element {
                    BodyElement::Positive(a) => (a.clone(), 0),
                    BodyElement::Negated(h) => (Atom::Hidden(*h), 1),
                    _ => continue,
                };
                if let Some(&dep) = ids.get(&atom) {
                    edges.push((head, dep, weight));
                }
            }
        }
        let n = ids.len();
        let mut level = vec![0usize; n];
        let mut changed = true;
        while changed {
            changed = false;
            for &(head, dep, weight) in &edges {
                let need = level[dep] + weight;
                if level[head] < need {
                    if need > n {
                        return Err(Error::NotStratified("negation occurs on a dependency cycle".into()));
                    }
                    level[head] = need;
                    changed = true;
                }
            }
        }
        let top = level.iter().copied().max().unwrap_or(0);
        let mut strata = vec![Vec::new(); if n == 0 { 0 } else { top + 1 }];
        for (i, rule) in program.rules.iter().enumerate() {
            strata[level[ids[&rule.head]]].push(i);
        }
        Ok(Evaluator { program, strata })
    }

    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    pub fn program(&self) -> &Program {
        self.program
    }

    /// Answer set for the given input facts.
    pub fn evaluate(&self, facts: &[Atom]) -> Result<AnswerSet> {
        self.evaluate_ordered(facts, false)
    }

    /// Evaluation with each stratum's rules tried in reverse order.
    pub fn evaluate_reversed(&self, facts: &[Atom]) -> Result<AnswerSet> {
        self.evaluate_ordered(facts, true)
    }

    fn evaluate_ordered(&self, facts: &[Atom], reverse: bool) -> Result<AnswerSet> {
        let inputs = self.check_facts(facts)?;
        let mut derived: BTreeSet<Atom> = facts.iter().cloned().collect();
        for stratum in &self.strata {
            let order: Vec<usize> = if reverse {
                stratum.iter().rev().copied().collect()
            } else {
                stratum.clone()
            };
            loop {
                let mut changed = false;
                for &i in &order {
                    let rule = &self.program.rules[i];
                    if !derived.contains(&rule.head) && body_holds(rule, &derived, &inputs) {
                        derived.insert(rule.head.clone());
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        Ok(AnswerSet { atoms: derived })
    }

    fn check_facts<'f>(&self, facts: &'f [Atom]) -> Result<HashMap<&'f str, f64>> {
        let mut inputs = HashMap::with_capacity(facts.len());
        for fact in facts {
            match fact {
                Atom::Input { feature, value } => {
                    if inputs.insert(feature.as_str(), value.0).is_some() {
                        return Err(Error::InputFacts(format!("duplicate input fact for `{feature}`")));
                    }
                }
                other => return Err(Error::InputFacts(format!("not an input fact: {other:?}"))),
            }
        }
        let names = &self.program.meta.feature_names;
        if let Some(missing) = names.iter().find(|n| !inputs.contains_key(n.as_str())) {
            return Err(Error::InputFacts(format!("missing input fact for `{missing}`")));
        }
        if inputs.len() != names.len() {
            let extra = inputs
                .keys()
                .find(|k| !names.iter().any(|n| n == *k))
                .copied()
                .unwrap_or_default();
            return Err(Error::InputFacts(format!("unknown feature `{extra}`")));
        }
        Ok(inputs)
    }

    /// Input facts for one feature vector, in metadata order.
    pub fn facts_for(&self, features: &[f64]) -> Result<Vec<Atom>> {
        facts_for(self.program, features)
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let answer = self.evaluate(&self.facts_for(features)?)?;
        Ok(most_appropriate_class(&answer, self.program.meta.majority_class))
    }
}

fn facts_for(program: &Program, features: &[f64]) -> Result<Vec<Atom>> {
    let names = &program.meta.feature_names;
    if features.len() != names.len() {
        return Err(Error::ArityMismatch {
            expected: names.len(),
            found: features.len(),
        });
    }
    Ok(names
        .iter()
        .zip(features)
        .map(|(name, &v)| Atom::input(name.clone(), v))
        .collect())
}

fn body_holds(rule: &LogicRule, derived: &BTreeSet<Atom>, inputs: &HashMap<&str, f64>) -> bool {
    let mut bindings: Vec<(&str, f64)> = Vec::new();
    for element in &rule.body {
        if let BodyElement::Bind { feature, var } = element {
            match inputs.get(feature.as_str()) {
                Some(&v) => bindings.push((var.as_str(), v)),
                None => return false,
            }
        }
    }
    rule.body.iter().all(|element| match element {
        BodyElement::Positive(atom) => derived.contains(atom),
        BodyElement::Negated(h) => !derived.contains(&Atom::Hidden(*h)),
        BodyElement::Bind { .. } => true,
        BodyElement::Compare { var, op, bound } => bindings
            .iter()
            .find(|(name, _)| name == var)
            .is_some_and(|&(_, v)| op.holds(v, bound.0)),
    })
}

/// Unique answer set of `program` extended with `facts`.
pub fn evaluate(program: &Program, facts: &[Atom]) -> Result<AnswerSet> {
    Evaluator::new(program)?.evaluate(facts)
}

/// Ranks classes by number of derived output atoms, then by the highest
/// confidence among them, then by smaller class id.
pub fn most_appropriate_class(answer: &AnswerSet, fallback: usize) -> Prediction {
    let mut per_class: BTreeMap<usize, (usize, Real)> = BTreeMap::new();
    for o in answer.outputs() {
        let entry = per_class.entry(o.class).or_insert((0, Real(f64::NEG_INFINITY)));
        entry.0 += 1;
        entry.1 = entry.1.max(o.confidence);
    }
    let best = per_class
        .into_iter()
        .max_by(|(ca, (na, fa)), (cb, (nb, fb))| na.cmp(nb).then(fa.cmp(fb)).then(cb.cmp(ca)));
    match best {
        Some((class, (count, conf))) => Prediction {
            class,
            support_count: count,
            best_confidence: conf.0,
            abstained: false,
        },
        None => Prediction {
            class: fallback,
            support_count: 0,
            best_confidence: 0.0,
            abstained: true,
        },
    }
}

/// Evaluates the program on one feature vector and picks the most
/// appropriate class.
pub fn predict(program: &Program, features: &[f64]) -> Result<Prediction> {
    Evaluator::new(program)?.predict(features)
}

/// Evaluates twice, once with every stratum's rules reversed, and reports
/// whether both runs agree.
pub fn double_evaluate_check(program: &Program, features: &[f64]) -> Result<bool> {
    let ev = Evaluator::new(program)?;
    let facts = ev.facts_for(features)?;
    Ok(ev.evaluate(&facts)? == ev.evaluate_reversed(&facts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{HiddenAtom, ProgramMeta};
    use crate::tree::CmpOp;

    fn meta(features: usize) -> ProgramMeta {
        ProgramMeta {
            hidden_widths: vec![4, 2],
            feature_names: (0..features).map(crate::dataset::feature_name).collect(),
            class_count: 2,
            majority_class: 0,
            scale_digits: 6,
        }
    }

    #[test]
    fn empty_program_returns_facts() {
        let p = Program::new(vec![], meta(2));
        let facts = vec![Atom::input("input_feat_0", 0.5), Atom::input("input_feat_1", 1.0)];
        let a = evaluate(&p, &facts).unwrap();
        assert_eq!(a.atoms().iter().cloned().collect::<Vec<_>>(), facts);
    }

    #[test]
    fn facts_must_match_features() {
        let p = Program::new(vec![], meta(2));
        let err = evaluate(&p, &[Atom::input("input_feat_0", 0.5)]).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
        let err = evaluate(
            &p,
            &[
                Atom::input("input_feat_0", 0.5),
                Atom::input("input_feat_1", 0.5),
                Atom::input("input_feat_2", 0.5),
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown"), "{err}");
        assert!(matches!(predict(&p, &[1.0]), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn negative_cycle_is_rejected() {
        let a = HiddenAtom::new(1, 0, CmpOp::Leq, 0);
        let b = HiddenAtom::new(1, 1, CmpOp::Leq, 0);
        let rules = vec![
            LogicRule::new(a.into(), vec![BodyElement::Negated(b)]),
            LogicRule::new(b.into(), vec![BodyElement::Negated(a)]),
        ];
        assert!(matches!(
            Evaluator::new(&Program::new(rules, meta(1))),
            Err(Error::NotStratified(_))
        ));
    }

    #[test]
    fn positive_recursion_reaches_fixpoint() {
        let a = HiddenAtom::new(1, 0, CmpOp::Leq, 0);
        let b = HiddenAtom::new(1, 1, CmpOp::Gt, 0);
        let c = HiddenAtom::new(2, 0, CmpOp::Gt, 0);
        let rules = vec![
            LogicRule::new(b.into(), vec![BodyElement::Positive(a.into())]),
            LogicRule::new(c.into(), vec![BodyElement::Negated(b)]),
            LogicRule::new(a.into(), vec![]),
        ];
        let p = Program::new(rules, meta(1));
        let ev = Evaluator::new(&p).unwrap();
        assert_eq!(ev.strata().len(), 2);
        let facts = ev.facts_for(&[0.0]).unwrap();
        let ans = ev.evaluate(&facts).unwrap();
        assert!(ans.contains(&a.into()) && ans.contains(&b.into()));
        assert!(!ans.contains(&c.into()));
        assert_eq!(ans, ev.evaluate_reversed(&facts).unwrap());
    }

    #[test]
    fn comparisons_use_exact_bounds() {
        let h = HiddenAtom::new(1, 0, CmpOp::Leq, 0);
        let rule = LogicRule::new(
            h.into(),
            vec![
                BodyElement::Bind {
                    feature: "input_feat_0".into(),
                    var: "V0".into(),
                },
                BodyElement::Compare {
                    var: "V0".into(),
                    op: CmpOp::Leq,
                    bound: Real(0.1234567),
                },
            ],
        );
        let p = Program::new(vec![rule], meta(1));
        let ev = Evaluator::new(&p).unwrap();
        // Same fixed-point key (123456), different exact outcome.
        let at = |x| ev.evaluate(&ev.facts_for(&[x]).unwrap()).unwrap().contains(&h.into());
        assert!(at(0.1234567));
        assert!(!at(0.12345671));
    }

    #[test]
    fn ranking_by_count_then_confidence() {
        let ans: AnswerSet = [Atom::output(1, 0, 0.9), Atom::output(0, 1, 0.6), Atom::output(0, 2, 0.6)]
            .into_iter()
            .collect();
        let p = most_appropriate_class(&ans, 1);
        assert_eq!((p.class, p.support_count, p.abstained), (0, 2, false));

        let ans: AnswerSet = [Atom::output(0, 0, 0.6), Atom::output(1, 1, 0.9)].into_iter().collect();
        let p = most_appropriate_class(&ans, 0);
        assert_eq!((p.class, p.best_confidence), (1, 0.9));

        let ans: AnswerSet = [Atom::output(2, 0, 0.7), Atom::output(1, 1, 0.7)].into_iter().collect();
        assert_eq!(most_appropriate_class(&ans, 0).class, 1);

        let p = most_appropriate_class(&AnswerSet::default(), 1);
        assert_eq!((p.class, p.support_count, p.abstained), (1, 0, true));
    }

    #[test]
    fn facts_only_program_is_confluent() {
        let rules = vec![
            LogicRule::new(Atom::output(0, 0, 1.0), vec![]),
            LogicRule::new(HiddenAtom::new(1, 0, CmpOp::Gt, 5).into(), vec![]),
        ];
        let p = Program::new(rules, meta(2));
        assert!(double_evaluate_check(&p, &[0.0, 1.0]).unwrap());
    }
}
