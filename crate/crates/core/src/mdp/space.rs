use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One factored state variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

/// A factored, enumerable state space. States are flat row-major indices
/// over the ordered variables (the last variable varies fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Variable>", into = "Vec<Variable>")]
pub struct StateSpace {
    variables: Vec<Variable>,
    strides: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new<S: Into<String>>(variables: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let variables = variables
            .into_iter()
            .map(|(name, cardinality)| Variable { name: name.into(), cardinality })
            .collect::<Vec<_>>();
        Self::from_variables(variables)
    }

    pub fn from_variables(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::domain("state space needs at least one variable"));
        }
        for (i, v) in variables.iter().enumerate() {
            if v.cardinality == 0 {
                return Err(Error::domain(format!("variable `{}` has cardinality 0", v.name)));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::domain(format!("duplicate variable `{}`", v.name)));
            }
        }
        let mut strides = vec![1usize; variables.len()];
        let mut size: u64 = 1;
        for i in (0..variables.len()).rev() {
            strides[i] = size as usize;
            size = size
                .checked_mul(variables[i].cardinality as u64)
                .filter(|s| *s <= usize::MAX as u64)
                .ok_or_else(|| Error::domain("state count overflows a 64-bit index"))?;
        }
        Ok(StateSpace { variables, strides, size: size as usize })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn encode(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.variables.len() {
            return Err(Error::domain(format!(
                "expected {} state variables, got {}",
                self.variables.len(),
                values.len()
            )));
        }
        let mut index = 0;
        for ((v, &x), &stride) in self.variables.iter().zip(values).zip(&self.strides) {
            if x >= v.cardinality {
                return Err(Error::domain(format!(
                    "variable `{}` = {x} outside 0..{}",
                    v.name, v.cardinality
                )));
            }
            index += x * stride;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.size {
            return Err(Error::domain(format!("state {index} outside 0..{}", self.size)));
        }
        Ok(self.decode_unchecked(index))
    }

    pub(crate) fn decode_unchecked(&self, index: usize) -> Vec<usize> {
        (0..self.variables.len()).map(|i| self.digit(index, i)).collect()
    }

    /// Value of variable `var` in state `index`.
    #[inline]
    pub fn digit(&self, index: usize, var: usize) -> usize {
        (index / self.strides[var]) % self.variables[var].cardinality
    }

    /// Projection onto the listed variables; see [`Abstraction`].
    pub fn abstraction(&self, mask: &[usize]) -> Result<Abstraction> {
        Abstraction::new(self, mask)
    }

    pub fn abstract_index(&self, s: usize, mask: &[usize]) -> Result<usize> {
        Ok(self.abstraction(mask)?.project(self, s))
    }
}

impl TryFrom<Vec<Variable>> for StateSpace {
    type Error = Error;
    fn try_from(v: Vec<Variable>) -> Result<Self> {
        StateSpace::from_variables(v)
    }
}

impl From<StateSpace> for Vec<Variable> {
    fn from(s: StateSpace) -> Self {
        s.variables
    }
}

/// Ordered, nonempty list of uniquely named primitive actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ActionSpace {
    names: Vec<String>,
}

impl ActionSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::domain("action space must be nonempty"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::domain(format!("duplicate action `{n}`")));
            }
        }
        Ok(ActionSpace { names })
    }

    /// Actions named `a0`, `a1`, ...
    pub fn anonymous(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("a{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, a: usize) -> &str {
        &self.names[a]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl TryFrom<Vec<String>> for ActionSpace {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        ActionSpace::new(v)
    }
}

impl From<ActionSpace> for Vec<String> {
    fn from(a: ActionSpace) -> Self {
        a.names
    }
}

/// Projection of full states onto an ordered subset of the variables.
///
/// Two states differing only in unmasked variables project to the same
/// abstract index. The projected index is row-major over the mask order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abstraction {
    vars: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl Abstraction {
    pub fn new(space: &StateSpace, mask: &[usize]) -> Result<Self> {
        for (i, &v) in mask.iter().enumerate() {
            if v >= space.variables.len() {
                return Err(Error::domain(format!("mask variable {v} not in state space")));
            }
            if mask[..i].contains(&v) {
                return Err(Error::domain(format!(
                    "mask repeats variable `{}`",
                    space.variables[v].name
                )));
            }
        }
        let mut strides = vec![1usize; mask.len()];
        let mut size = 1usize;
        for i in (0..mask.len()).rev() {
            strides[i] = size;
            size *= space.variables[mask[i]].cardinality;
        }
        Ok(Abstraction { vars: mask.to_vec(), strides, size })
    }

    pub fn full(space: &StateSpace) -> Self {
        let mask: Vec<usize> = (0..space.variables.len()).collect();
        Abstraction::new(space, &mask).expect("identity mask is valid")
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    /// Number of abstract states.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn project(&self, space: &StateSpace, s: usize) -> usize {
        self.vars
            .iter()
            .zip(&self.strides)
            .map(|(&v, &stride)| space.digit(s, v) * stride)
            .sum()
    }

    /// Abstract index of every full state.
    pub fn table(&self, space: &StateSpace) -> Vec<usize> {
        (0..space.len()).map(|s| self.project(space, s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn taxi() -> StateSpace {
        StateSpace::new([("dest", 4), ("pass", 5), ("x", 5), ("y", 5)]).unwrap()
    }

    #[test]
    fn all_zero_encodes_to_zero() {
        assert_eq!(taxi().encode(&[0, 0, 0, 0]).unwrap(), 0);
    }

    #[test]
    fn last_taxi_state_is_499() {
        // 3*125 + 4*25 + 4*5 + 4
        assert_eq!(taxi().encode(&[3, 4, 4, 4]).unwrap(), 499);
        assert_eq!(taxi().len(), 500);
    }

    #[test]
    fn out_of_range_variable_is_domain_error() {
        assert!(matches!(taxi().encode(&[4, 0, 0, 0]), Err(Error::Domain(_))));
        assert!(taxi().encode(&[0, 0, 0]).is_err());
        assert!(taxi().decode(500).is_err());
    }

    #[test]
    fn exhaustive_bijection_on_taxi() {
        let space = taxi();
        for s in 0..space.len() {
            let v = space.decode(s).unwrap();
            assert_eq!(space.encode(&v).unwrap(), s);
        }
    }

    #[test]
    fn full_mask_is_identity() {
        let space = taxi();
        for s in 0..space.len() {
            assert_eq!(space.abstract_index(s, &[0, 1, 2, 3]).unwrap(), s);
        }
    }

    #[test]
    fn single_variable_projection() {
        let space = taxi();
        for dest in 0..4 {
            for x in 0..5 {
                for y in 0..5 {
                    let s = space.encode(&[dest, 2, x, y]).unwrap();
                    assert_eq!(space.abstract_index(s, &[1]).unwrap(), 2);
                }
            }
        }
    }

    #[test]
    fn pass_x_y_mask_collapses_to_125() {
        let space = taxi();
        let abs = space.abstraction(&[1, 2, 3]).unwrap();
        assert_eq!(abs.len(), 125);
        let mut seen = abs.table(&space);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 125);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(StateSpace::new([("a", 0)]).is_err());
        assert!(StateSpace::new([("a", 2), ("a", 3)]).is_err());
        assert!(StateSpace::new([("a", usize::MAX), ("b", 3)]).is_err());
        assert!(ActionSpace::new(Vec::<String>::new()).is_err());
        assert!(ActionSpace::new(["n", "n"]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(cards in prop::collection::vec(1usize..8, 1..5), seed in any::<u64>()) {
            let space = StateSpace::new(cards.iter().enumerate().map(|(i, &c)| (format!("v{i}"), c))).unwrap();
            let values: Vec<usize> = cards.iter().enumerate().map(|(i, &c)| (seed as usize >> (i * 3)) % c).collect();
            let s = space.encode(&values).unwrap();
            prop_assert_eq!(space.decode(s).unwrap(), values);
        }

        #[test]
        fn projection_ignores_unmasked(a in 0usize..500, b in 0usize..500) {
            let space = taxi();
            let va = space.decode(a).unwrap();
            let vb = space.decode(b).unwrap();
            let mask = [1usize, 2, 3];
            if mask.iter().all(|&m| va[m] == vb[m]) {
                prop_assert_eq!(space.abstract_index(a, &mask).unwrap(), space.abstract_index(b, &mask).unwrap());
            }
        }
    }
}
