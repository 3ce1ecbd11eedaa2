//! Two-state HMM over {Near, Far} with {swm, hspwm} emissions, the sliding
//! decision window, and the three region deciders.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{Observation, Region};

const STOCHASTIC_TOL: f64 = 1e-12;
/// Log-domain slack under which two path scores count as tied.
const TIE_TOL: f64 = 1e-9;

/// `λ = (A, B, π)`; rows indexed by [`Region::index`], emission columns by
/// [`Observation::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    a: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
    pi: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<f64>,
}

fn check_row(name: &str, row: &[f64; 2]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInput(format!("{name} has entries outside [0, 1]: {row:?}")));
    }
    let s = row[0] + row[1];
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

impl HmmModel {
    pub fn new(a: [[f64; 2]; 2], b: [[f64; 2]; 2], pi: [f64; 2]) -> Result<Self> {
        let m = Self { a, b, pi, smoothing: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        self.smoothing = Some(smoothing);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_row("A[near]", &self.a[0])?;
        check_row("A[far]", &self.a[1])?;
        check_row("B[near]", &self.b[0])?;
        check_row("B[far]", &self.b[1])?;
        check_row("pi", &self.pi)?;
        if let Some(s) = self.smoothing {
            if !(s >= 0.0) {
                return Err(Error::InvalidInput(format!("smoothing {s} is negative")));
            }
        }
        Ok(())
    }

    /// Transition probability `from → to`.
    pub fn transition(&self, from: Region, to: Region) -> f64 {
        self.a[from.index()][to.index()]
    }

    pub fn emission(&self, state: Region, obs: Observation) -> f64 {
        self.b[state.index()][obs.index()]
    }

    pub fn initial(&self, state: Region) -> f64 {
        self.pi[state.index()]
    }

    pub fn a(&self) -> &[[f64; 2]; 2] {
        &self.a
    }

    pub fn b(&self) -> &[[f64; 2]; 2] {
        &self.b
    }

    pub fn pi(&self) -> &[f64; 2] {
        &self.pi
    }

    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }
}

/// The `U` most recent observations, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationWindow {
    capacity: usize,
    entries: VecDeque<Observation>,
}

impl ObservationWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("window length U must be positive".into()));
        }
        Ok(Self { capacity, entries: VecDeque::with_capacity(capacity) })
    }

    /// Builds a window holding the last `capacity` items of `obs`.
    pub fn from_slice(capacity: usize, obs: &[Observation]) -> Result<Self> {
        let mut w = Self::new(capacity)?;
        obs.iter().for_each(|&o| w.push(o));
        Ok(w)
    }

    /// Appends `obs`, evicting the oldest entry when full.
    pub fn push(&mut self, obs: Observation) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(obs);
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn latest(&self) -> Option<Observation> {
        self.entries.back().copied()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = Observation> + ExactSizeIterator + '_ {
        self.entries.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<Observation> {
        self.iter().collect()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Index of the better of two scores, Near (0) unless Far wins by more than
/// the tie tolerance.
fn prefer_near(near: f64, far: f64) -> usize {
    if near >= far - TIE_TOL {
        0
    } else {
        1
    }
}

/// Most likely state path, computed with log probabilities. Near-tied
/// alternatives resolve to Near, first for the final state and then for each
/// predecessor during backtracking.
pub fn viterbi(model: &HmmModel, obs: &[Observation]) -> Result<Vec<Region>> {
    if obs.is_empty() {
        return Err(Error::InvalidInput("viterbi needs at least one observation".into()));
    }
    let la = model.a.map(|row| row.map(ln));
    let lb = model.b.map(|row| row.map(ln));

    let mut delta: [f64; 2] = std::array::from_fn(|s| ln(model.pi[s]) + lb[s][obs[0].index()]);
    let mut back: Vec<[usize; 2]> = Vec::with_capacity(obs.len() - 1);
    for o in &obs[1..] {
        let mut next = [0.0; 2];
        let mut ptr = [0usize; 2];
        for s in 0..2 {
            let from_near = delta[0] + la[0][s];
            let from_far = delta[1] + la[1][s];
            let p = prefer_near(from_near, from_far);
            ptr[s] = p;
            next[s] = if p == 0 { from_near } else { from_far } + lb[s][o.index()];
        }
        back.push(ptr);
        delta = next;
    }

    let mut state = prefer_near(delta[0], delta[1]);
    let mut path = vec![Region::from_index(state); obs.len()];
    for (t, ptr) in back.iter().enumerate().rev() {
        state = ptr[state];
        path[t] = Region::from_index(state);
    }
    Ok(path)
}

/// Most frequent entry; an exact tie goes to the most recent one.
pub fn majority_vote(window: &ObservationWindow) -> Result<Observation> {
    let latest = window
        .latest()
        .ok_or_else(|| Error::InvalidInput("majority vote over an empty window".into()))?;
    let swm = window.iter().filter(|&o| o == Observation::Swm).count();
    let hspwm = window.len() - swm;
    Ok(match swm.cmp(&hspwm) {
        std::cmp::Ordering::Greater => Observation::Swm,
        std::cmp::Ordering::Less => Observation::Hspwm,
        std::cmp::Ordering::Equal => latest,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMethod {
    Single,
    Majority,
    Hmm,
}

impl DecisionMethod {
    pub const ALL: [DecisionMethod; 3] =
        [DecisionMethod::Single, DecisionMethod::Majority, DecisionMethod::Hmm];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMethod::Single => "single",
            DecisionMethod::Majority => "majority",
            DecisionMethod::Hmm => "hmm",
        }
    }
}

impl std::str::FromStr for DecisionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecisionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown decision method {s:?}")))
    }
}

pub fn decide_region(
    window: &ObservationWindow,
    method: DecisionMethod,
    model: Option<&HmmModel>,
) -> Result<Region> {
    match method {
        DecisionMethod::Single => window
            .latest()
            .map(Observation::region)
            .ok_or_else(|| Error::InvalidInput("empty observation window".into())),
        DecisionMethod::Majority => majority_vote(window).map(Observation::region),
        DecisionMethod::Hmm => {
            let model = model
                .ok_or_else(|| Error::InvalidConfig("hmm decisions need an HMM model".into()))?;
            let path = viterbi(model, &window.to_vec())?;
            Ok(*path.last().expect("viterbi returns one state per observation"))
        }
    }
}
