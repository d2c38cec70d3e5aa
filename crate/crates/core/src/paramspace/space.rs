use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::value::{Domain, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub domain: Domain,
    pub default: Value,
}

impl Parameter {
    pub fn new(name: impl Into<String>, domain: Domain, default: impl Into<Value>) -> Self {
        Parameter {
            name: name.into(),
            domain,
            default: default.into(),
        }
    }
}

/// `child` is active only while `parent` is active and holds one of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub child: String,
    pub parent: String,
    pub values: Vec<Value>,
}

/// A combination of assignments no valid configuration may contain all of.
#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddenClause {
    pub assignments: Vec<(String, Value)>,
}

impl ForbiddenClause {
    pub fn new(assignments: Vec<(String, Value)>) -> Self {
        ForbiddenClause { assignments }
    }

    /// True when every assignment of the clause is present in `values`.
    pub fn is_satisfied_by(&self, values: &BTreeMap<String, Value>) -> bool {
        self.assignments
            .iter()
            .all(|(name, v)| values.get(name) == Some(v))
    }
}

impl fmt::Display for ForbiddenClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (name, v)) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={v}")?;
        }
        f.write_str("}")
    }
}

/// Identity of a space, derived from its rendered text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpaceId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("parameter `{0}`: lower bound exceeds upper bound")]
    InvertedRange(String),
    #[error("parameter `{0}`: log-scaled range needs a positive lower bound")]
    NonPositiveLogRange(String),
    #[error("parameter `{0}`: non-finite bound")]
    NonFiniteBound(String),
    #[error("parameter `{0}`: categorical domain is empty")]
    EmptyDomain(String),
    #[error("parameter `{0}`: duplicate categorical value `{1}`")]
    DuplicateValue(String, String),
    #[error("parameter `{name}`: default `{value}` is outside its domain")]
    DefaultOutOfDomain { name: String, value: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` cannot condition on itself")]
    SelfCondition(String),
    #[error("parameter `{0}` already has a condition")]
    MultipleConditions(String),
    #[error("condition on `{0}` has no activating values")]
    EmptyActivation(String),
    #[error("value `{value}` is outside the domain of `{name}`")]
    ValueOutOfDomain { name: String, value: String },
    #[error("conditions form a cycle through `{0}`")]
    CyclicConditions(String),
    #[error("forbidden clause is empty")]
    EmptyForbidden,
    #[error("forbidden clause names `{0}` twice")]
    DuplicateForbiddenName(String),
    #[error("default configuration violates forbidden clause {0}")]
    DefaultForbidden(String),
}

/// Declared parameters, their conditions and forbidden clauses.
///
/// Immutable after construction; every constructor path goes through
/// [`ParameterSpace::new`], which enforces the structural invariants.
#[derive(Debug, Clone)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
    conditions: Vec<Condition>,
    forbidden: Vec<ForbiddenClause>,
    index: HashMap<String, usize>,
    condition_of: Vec<Option<usize>>,
    topo: Vec<usize>,
    id: SpaceId,
}

impl PartialEq for ParameterSpace {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.conditions == other.conditions
            && self.forbidden == other.forbidden
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unconditional parameter `{0}` has no value")]
pub struct MissingUnconditional(pub String);

impl ParameterSpace {
    pub fn new(
        params: Vec<Parameter>,
        conditions: Vec<Condition>,
        forbidden: Vec<ForbiddenClause>,
    ) -> Result<Self, SpaceError> {
        let mut index = HashMap::new();
        for (i, p) in params.iter().enumerate() {
            if index.insert(p.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateParameter(p.name.clone()));
            }
            check_parameter(p)?;
        }

        let mut condition_of = vec![None; params.len()];
        for (ci, c) in conditions.iter().enumerate() {
            let child = *index
                .get(&c.child)
                .ok_or_else(|| SpaceError::UnknownParameter(c.child.clone()))?;
            let parent = *index
                .get(&c.parent)
                .ok_or_else(|| SpaceError::UnknownParameter(c.parent.clone()))?;
            if child == parent {
                return Err(SpaceError::SelfCondition(c.child.clone()));
            }
            if condition_of[child].is_some() {
                return Err(SpaceError::MultipleConditions(c.child.clone()));
            }
            if c.values.is_empty() {
                return Err(SpaceError::EmptyActivation(c.child.clone()));
            }
            for v in &c.values {
                if !params[parent].domain.contains(v) {
                    return Err(SpaceError::ValueOutOfDomain {
                        name: c.parent.clone(),
                        value: v.to_string(),
                    });
                }
            }
            condition_of[child] = Some(ci);
        }

        let topo = topological_order(&params, &conditions, &condition_of, &index)?;

        for clause in &forbidden {
            if clause.assignments.is_empty() {
                return Err(SpaceError::EmptyForbidden);
            }
            let mut seen = BTreeSet::new();
            for (name, v) in &clause.assignments {
                let i = *index
                    .get(name)
                    .ok_or_else(|| SpaceError::UnknownParameter(name.clone()))?;
                if !seen.insert(name.as_str()) {
                    return Err(SpaceError::DuplicateForbiddenName(name.clone()));
                }
                if !params[i].domain.contains(v) {
                    return Err(SpaceError::ValueOutOfDomain {
                        name: name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }

        let mut space = ParameterSpace {
            params,
            conditions,
            forbidden,
            index,
            condition_of,
            topo,
            id: SpaceId(0),
        };
        let defaults = space.default_values();
        if let Some(clause) = space.violated_clause(&defaults) {
            return Err(SpaceError::DefaultForbidden(clause.to_string()));
        }
        space.id = fingerprint(&super::dsl::render_space(&space));
        Ok(space)
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn forbidden(&self) -> &[ForbiddenClause] {
        &self.forbidden
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn condition_for(&self, name: &str) -> Option<&Condition> {
        let i = self.position(name)?;
        self.condition_of[i].map(|ci| &self.conditions[ci])
    }

    /// Parameter indices in dependency order, ties broken by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn violated_clause(&self, values: &BTreeMap<String, Value>) -> Option<&ForbiddenClause> {
        self.forbidden.iter().find(|c| c.is_satisfied_by(values))
    }

    /// Whether parameter `i` is active given the values chosen so far.
    pub(crate) fn is_active_in(&self, i: usize, values: &BTreeMap<String, Value>) -> bool {
        match self.condition_of[i] {
            None => true,
            Some(ci) => {
                let c = &self.conditions[ci];
                values.get(&c.parent).is_some_and(|v| c.values.contains(v))
            }
        }
    }

    /// Names of the parameters active under `partial`.
    ///
    /// A parameter is active when it is unconditional, or when its parent is
    /// active and holds an activating value in `partial`.
    pub fn active_parameters(
        &self,
        partial: &BTreeMap<String, Value>,
    ) -> Result<BTreeSet<String>, MissingUnconditional> {
        let mut active = BTreeSet::new();
        let mut active_flags = vec![false; self.params.len()];
        for &i in &self.topo {
            let p = &self.params[i];
            let on = match self.condition_of[i] {
                None => {
                    if !partial.contains_key(&p.name) {
                        return Err(MissingUnconditional(p.name.clone()));
                    }
                    true
                }
                Some(ci) => {
                    let c = &self.conditions[ci];
                    let parent = self.index[&c.parent];
                    active_flags[parent]
                        && partial.get(&c.parent).is_some_and(|v| c.values.contains(v))
                }
            };
            if on {
                active_flags[i] = true;
                active.insert(p.name.clone());
            }
        }
        Ok(active)
    }

    /// Restrict `values` to the parameters it activates, filling newly active
    /// parameters from `fill`.
    pub fn repair(
        &self,
        values: &BTreeMap<String, Value>,
        mut fill: impl FnMut(&Parameter) -> Value,
    ) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for &i in &self.topo {
            if self.is_active_in(i, &out) {
                let p = &self.params[i];
                let v = values.get(&p.name).cloned().unwrap_or_else(|| fill(p));
                out.insert(p.name.clone(), v);
            }
        }
        out
    }

    /// All active parameters at their declared defaults.
    pub fn default_values(&self) -> BTreeMap<String, Value> {
        self.repair(&BTreeMap::new(), |p| p.default.clone())
    }

    /// Copy of this space with one more forbidden clause.
    pub fn with_forbidden(&self, clause: ForbiddenClause) -> Result<Self, SpaceError> {
        let mut forbidden = self.forbidden.clone();
        forbidden.push(clause);
        ParameterSpace::new(self.params.clone(), self.conditions.clone(), forbidden)
    }

    /// Copy of this space with the domain of `name` replaced.
    ///
    /// Forbidden clauses that name a value no longer in the domain can never
    /// fire and are dropped; activating values outside the domain are dropped.
    pub fn with_domain(&self, name: &str, domain: Domain) -> Result<Self, SpaceError> {
        let i = self
            .position(name)
            .ok_or_else(|| SpaceError::UnknownParameter(name.to_string()))?;
        let mut params = self.params.clone();
        params[i].domain = domain;
        let domain = &params[i].domain;
        let conditions = self
            .conditions
            .iter()
            .map(|c| {
                let mut c = c.clone();
                if c.parent == name {
                    c.values.retain(|v| domain.contains(v));
                }
                c
            })
            .collect();
        let forbidden = self
            .forbidden
            .iter()
            .filter(|f| {
                f.assignments
                    .iter()
                    .all(|(n, v)| n != name || domain.contains(v))
            })
            .cloned()
            .collect();
        ParameterSpace::new(params, conditions, forbidden)
    }
}

fn check_parameter(p: &Parameter) -> Result<(), SpaceError> {
    match &p.domain {
        Domain::Integer { lo, hi } => {
            if lo > hi {
                return Err(SpaceError::InvertedRange(p.name.clone()));
            }
        }
        Domain::Real { lo, hi, log } => {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(SpaceError::NonFiniteBound(p.name.clone()));
            }
            if lo > hi {
                return Err(SpaceError::InvertedRange(p.name.clone()));
            }
            if *log && *lo <= 0.0 {
                return Err(SpaceError::NonPositiveLogRange(p.name.clone()));
            }
        }
        Domain::Categorical(vals) => {
            if vals.is_empty() {
                return Err(SpaceError::EmptyDomain(p.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for v in vals {
                if !seen.insert(v) {
                    return Err(SpaceError::DuplicateValue(p.name.clone(), v.clone()));
                }
            }
        }
    }
    if !p.domain.contains(&p.default) {
        return Err(SpaceError::DefaultOutOfDomain {
            name: p.name.clone(),
            value: p.default.to_string(),
        });
    }
    Ok(())
}

fn topological_order(
    params: &[Parameter],
    conditions: &[Condition],
    condition_of: &[Option<usize>],
    index: &HashMap<String, usize>,
) -> Result<Vec<usize>, SpaceError> {
    let n = params.len();
    let parent_of: Vec<Option<usize>> = condition_of
        .iter()
        .map(|c| c.map(|ci| index[&conditions[ci].parent]))
        .collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Each parameter has at most one parent, so repeatedly taking the first
    // unplaced parameter whose parent is placed yields declaration-order ties.
    while order.len() < n {
        let next = (0..n).find(|&i| !placed[i] && parent_of[i].is_none_or(|p| placed[p]));
        match next {
            Some(i) => {
                placed[i] = true;
                order.push(i);
            }
            None => {
                let stuck = (0..n).find(|&i| !placed[i]).expect("unplaced parameter");
                return Err(SpaceError::CyclicConditions(params[stuck].name.clone()));
            }
        }
    }
    Ok(order)
}

fn fingerprint(text: &str) -> SpaceId {
    let digest = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    SpaceId(u64::from_be_bytes(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(name: &str, lo: i64, hi: i64, def: i64) -> Parameter {
        Parameter::new(name, Domain::Integer { lo, hi }, def)
    }

    fn cond(child: &str, parent: &str, vals: &[i64]) -> Condition {
        Condition {
            child: child.into(),
            parent: parent.into(),
            values: vals.iter().map(|&v| Value::Int(v)).collect(),
        }
    }

    fn chain() -> ParameterSpace {
        ParameterSpace::new(
            vec![int("x", 0, 1, 1), int("y", 0, 1, 1), int("z", 0, 1, 0)],
            vec![cond("y", "x", &[1]), cond("z", "y", &[1])],
            vec![],
        )
        .unwrap()
    }

    fn assign(pairs: &[(&str, i64)]) -> BTreeMap<String, Value> {
        pairs
            .iter()
            .map(|(n, v)| (n.to_string(), Value::Int(*v)))
            .collect()
    }

    #[test]
    fn no_conditions_all_active() {
        let s = ParameterSpace::new(vec![int("a", 0, 1, 0), int("b", 0, 1, 0)], vec![], vec![])
            .unwrap();
        let active = s.active_parameters(&assign(&[("a", 0), ("b", 1)])).unwrap();
        assert_eq!(active.len(), 2);
    }

    #[test]
    fn chain_activation_is_transitive() {
        let s = chain();
        let active = s
            .active_parameters(&assign(&[("x", 1), ("y", 1), ("z", 0)]))
            .unwrap();
        assert_eq!(active, ["x", "y", "z"].iter().map(|s| s.to_string()).collect());
        let active = s
            .active_parameters(&assign(&[("x", 0), ("y", 1), ("z", 0)]))
            .unwrap();
        assert_eq!(active, ["x"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn missing_unconditional_is_an_error() {
        let s = chain();
        assert_eq!(
            s.active_parameters(&assign(&[("y", 1)])),
            Err(MissingUnconditional("x".into()))
        );
    }

    #[test]
    fn cycle_rejected() {
        let err = ParameterSpace::new(
            vec![int("x", 0, 1, 1), int("y", 0, 1, 1)],
            vec![cond("y", "x", &[1]), cond("x", "y", &[1])],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::CyclicConditions(_)));
    }

    #[test]
    fn forbidden_default_rejected() {
        let err = ParameterSpace::new(
            vec![int("x", 0, 1, 1)],
            vec![],
            vec![ForbiddenClause::new(vec![("x".into(), Value::Int(1))])],
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::DefaultForbidden(_)));
    }

    #[test]
    fn topological_ties_follow_declaration() {
        let s = ParameterSpace::new(
            vec![int("c", 0, 1, 1), int("a", 0, 1, 1), int("b", 0, 1, 1)],
            vec![cond("c", "b", &[1])],
            vec![],
        )
        .unwrap();
        assert_eq!(s.topological_order(), &[1, 2, 0]);
    }

    #[test]
    fn with_domain_drops_dead_clauses() {
        let s = ParameterSpace::new(
            vec![int("x", 0, 10, 0), int("y", 0, 1, 0)],
            vec![],
            vec![ForbiddenClause::new(vec![
                ("x".into(), Value::Int(9)),
                ("y".into(), Value::Int(1)),
            ])],
        )
        .unwrap();
        let r = s.with_domain("x", Domain::Integer { lo: 0, hi: 5 }).unwrap();
        assert!(r.forbidden().is_empty());
        assert_ne!(r.id(), s.id());
    }
}
