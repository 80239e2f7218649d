//! Strategy evaluation schemes and per-strategy score tracking.
//!
//! Every strategy owned by an agent carries a virtual book: a virtual wealth
//! that starts at the agent's initial wealth and a virtual position that
//! accumulates the strategy's own (constrained) actions. The suggestion a
//! strategy makes each step is filtered through the same non-negative cash
//! constraint that applies to agents, evaluated against this virtual book;
//! the constrained result is the strategy's *effective action* and is what
//! all three schemes score:
//!
//! - wealth game: the score is the virtual wealth itself,
//!   `u' = u + k_virtual * dP`,
//! - minority game: `u' = u - a_eff * dP` (trend opposition pays),
//! - majority game: `u' = u + a_eff * dP` (trend following pays).
//!
//! Finite score memory ranks strategies by `u(t) - u(t-T)` instead of
//! `u(t)`, using a bounded window of past scores; before step `T` the window
//! is truncated at the run start so early selections match the
//! infinite-memory scheme. Because the wealth-game score is itself
//! constraint-bound, its finite-memory variant still feels the whole past
//! through the virtual book; this is inherent to the scheme, not a defect.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{constrain_action, limit_unchecked, Action, MarketHistory, Strategy};

/// Which quantity a scheme rewards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameKind {
    /// Virtual wealth of always following the strategy.
    Wealth,
    /// Trend-opposing payoff `-a * dP`.
    Minority,
    /// Trend-following payoff `+a * dP`.
    Majority,
}

impl GameKind {
    pub const ALL: [GameKind; 3] = [GameKind::Wealth, GameKind::Minority, GameKind::Majority];

    /// Stable tag used for seed derivation; depends on the kind only, so a
    /// finite-memory population draws the same strategies as its
    /// infinite-memory counterpart under the same master seed.
    pub(crate) fn tag(self) -> u64 {
        match self {
            GameKind::Wealth => 0xA1,
            GameKind::Minority => 0xA2,
            GameKind::Majority => 0xA3,
        }
    }
}

/// How far back the score ranking looks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreMemory {
    /// Rank by the full cumulative score.
    Infinite,
    /// Rank by the score gained over the last `T` steps (`T >= 1`).
    Window(u32),
}

/// A strategy evaluation scheme: the score rule plus its memory horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: GameKind,
    pub memory: ScoreMemory,
}

impl Scheme {
    pub fn infinite(kind: GameKind) -> Scheme {
        Scheme {
            kind,
            memory: ScoreMemory::Infinite,
        }
    }

    pub fn windowed(kind: GameKind, window: u32) -> Scheme {
        Scheme {
            kind,
            memory: ScoreMemory::Window(window),
        }
    }

    /// The three infinite-memory schemes in canonical order.
    pub fn all_infinite() -> Vec<Scheme> {
        GameKind::ALL.iter().map(|&k| Scheme::infinite(k)).collect()
    }

    /// The three finite-memory schemes with the same window.
    pub fn all_windowed(window: u32) -> Vec<Scheme> {
        GameKind::ALL
            .iter()
            .map(|&k| Scheme::windowed(k, window))
            .collect()
    }

    /// Compact label: WG / MinG / MajG, with a D prefix for finite memory.
    pub fn label(&self) -> &'static str {
        match (self.kind, self.memory) {
            (GameKind::Wealth, ScoreMemory::Infinite) => "WG",
            (GameKind::Minority, ScoreMemory::Infinite) => "MinG",
            (GameKind::Majority, ScoreMemory::Infinite) => "MajG",
            (GameKind::Wealth, ScoreMemory::Window(_)) => "DWG",
            (GameKind::Minority, ScoreMemory::Window(_)) => "DMinG",
            (GameKind::Majority, ScoreMemory::Window(_)) => "DMajG",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.memory {
            ScoreMemory::Infinite => write!(f, "{}", self.label()),
            ScoreMemory::Window(t) => write!(f, "{}(T={})", self.label(), t),
        }
    }
}

/// Bounded queue of the most recent `T + 1` score values.
#[derive(Clone, Debug)]
pub struct ScoreWindow {
    buf: VecDeque<f64>,
    cap: usize,
}

impl ScoreWindow {
    pub fn new(window: u32) -> ScoreWindow {
        let cap = window as usize + 1;
        ScoreWindow {
            buf: VecDeque::with_capacity(cap),
            cap,
        }
    }

    pub fn push(&mut self, score: f64) {
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(score);
    }

    /// `u(max(t - T, 0))` — truncated at the run start while filling.
    pub fn oldest(&self) -> f64 {
        *self.buf.front().expect("score window is never empty")
    }

    /// `u(t)`.
    pub fn newest(&self) -> f64 {
        *self.buf.back().expect("score window is never empty")
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Per-strategy state: the lookup table, its virtual book, and its score.
#[derive(Clone, Debug)]
pub struct ScoreTracker {
    pub strategy: Strategy,
    /// Virtual mark-to-market wealth of always following this strategy;
    /// the constraint is evaluated against it. Equals `score` for the
    /// wealth game.
    pub virtual_wealth: f64,
    /// Units accumulated by the strategy's effective actions.
    pub virtual_position: i64,
    /// Cumulative scheme score `u`.
    pub score: f64,
    /// Present only under finite score memory.
    pub window: Option<ScoreWindow>,
}

impl ScoreTracker {
    /// Fresh tracker. The wealth-game score starts at the initial wealth
    /// (it is a wealth); minority/majority scores start at zero.
    pub fn new(
        strategy: Strategy,
        kind: GameKind,
        memory: ScoreMemory,
        initial_wealth: f64,
    ) -> ScoreTracker {
        let score = match kind {
            GameKind::Wealth => initial_wealth,
            GameKind::Minority | GameKind::Majority => 0.0,
        };
        let window = match memory {
            ScoreMemory::Infinite => None,
            ScoreMemory::Window(t) => {
                let mut w = ScoreWindow::new(t);
                w.push(score);
                Some(w)
            }
        };
        ScoreTracker {
            strategy,
            virtual_wealth: initial_wealth,
            virtual_position: 0,
            score,
            window,
        }
    }

    /// The raw table suggestion for the current history.
    #[inline]
    pub fn suggest(&self, history: &MarketHistory) -> Action {
        self.strategy.suggest(history)
    }

    /// The suggestion filtered through the non-negative cash constraint of
    /// this strategy's virtual book at the current price.
    #[inline]
    pub fn effective_action(&self, raw: Action, price: f64) -> Action {
        debug_assert!(price > 0.0);
        constrain_action(
            self.virtual_position,
            limit_unchecked(self.virtual_wealth, price),
            raw,
        )
    }

    /// Apply one step's score update for `dp = P_next - P_t` and advance the
    /// virtual book by the effective action.
    pub fn settle(&mut self, kind: GameKind, effective: Action, dp: f64) {
        self.virtual_wealth += self.virtual_position as f64 * dp;
        self.score = match kind {
            GameKind::Wealth => self.virtual_wealth,
            GameKind::Minority => self.score - effective.value_f64() * dp,
            GameKind::Majority => self.score + effective.value_f64() * dp,
        };
        self.virtual_position += effective.value() as i64;
        if let Some(w) = self.window.as_mut() {
            w.push(self.score);
        }
    }

    /// The score used for ranking: `u(t)` under infinite memory,
    /// `u(t) - u(max(t - T, 0))` under finite memory.
    #[inline]
    pub fn effective_score(&self) -> f64 {
        match &self.window {
            None => self.score,
            Some(w) => w.newest() - w.oldest(),
        }
    }
}

/// Index of the highest score, ties broken uniformly at random among the
/// maximizers. The generator is consumed only when ties occur.
pub fn select_strategy<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    assert!(!scores.is_empty(), "cannot select from zero strategies");
    let mut best = 0usize;
    let mut ties = 1u32;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
            ties = 1;
        } else if scores[i] == scores[best] {
            // reservoir step: the i-th tied candidate wins with odds 1/ties
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                best = i;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    use crate::domain::Strategy;

    fn tracker(kind: GameKind, wealth: f64, position: i64, score: f64) -> ScoreTracker {
        let mut t = ScoreTracker::new(
            Strategy::constant(2, Action::Abstain),
            kind,
            ScoreMemory::Infinite,
            wealth,
        );
        t.virtual_position = position;
        t.score = score;
        t
    }

    #[test]
    fn wealth_game_update_examples() {
        // held position earns the price move, abstention leaves it
        let mut t = tracker(GameKind::Wealth, 5000.0, 3, 5000.0);
        let eff = t.effective_action(Action::Abstain, 1000.0);
        t.settle(GameKind::Wealth, eff, 1.0);
        assert_eq!(t.score, 5003.0);
        assert_eq!(t.virtual_position, 3);

        // zero position: score unchanged, buy goes through
        let mut t = tracker(GameKind::Wealth, 5000.0, 0, 5000.0);
        let eff = t.effective_action(Action::Buy, 1000.0);
        t.settle(GameKind::Wealth, eff, -1.0);
        assert_eq!(t.score, 5000.0);
        assert_eq!(t.virtual_position, 1);

        // at the position limit (K = 5) a buy is replaced by abstention
        let mut t = tracker(GameKind::Wealth, 5000.0, 5, 5000.0);
        let eff = t.effective_action(Action::Buy, 1000.0);
        assert_eq!(eff, Action::Abstain);
        t.settle(GameKind::Wealth, eff, 1.0);
        assert_eq!(t.score, 5005.0);
        assert_eq!(t.virtual_position, 5);
    }

    #[test]
    fn minority_game_update_examples() {
        let mut t = tracker(GameKind::Minority, 5000.0, 0, 0.0);
        t.settle(GameKind::Minority, Action::Buy, -1.0);
        assert_eq!(t.score, 1.0);

        let mut t = tracker(GameKind::Minority, 5000.0, 0, 0.0);
        t.settle(GameKind::Minority, Action::Buy, 1.0);
        assert_eq!(t.score, -1.0);

        let mut t = tracker(GameKind::Minority, 5000.0, 0, 7.0);
        t.settle(GameKind::Minority, Action::Abstain, 1.0);
        assert_eq!(t.score, 7.0);
    }

    #[test]
    fn majority_game_update_examples() {
        let mut t = tracker(GameKind::Majority, 5000.0, 0, 0.0);
        t.settle(GameKind::Majority, Action::Buy, 1.0);
        assert_eq!(t.score, 1.0);

        let mut t = tracker(GameKind::Majority, 5000.0, 0, 0.0);
        t.settle(GameKind::Majority, Action::Sell, 1.0);
        assert_eq!(t.score, -1.0);

        let mut t = tracker(GameKind::Majority, 5000.0, 0, 3.0);
        t.settle(GameKind::Majority, Action::Sell, -1.0);
        assert_eq!(t.score, 4.0);
    }

    #[test]
    fn effective_score_memory_variants() {
        // infinite memory: the cumulative score itself
        let t = tracker(GameKind::Minority, 0.0, 0, 42.0);
        assert_eq!(t.effective_score(), 42.0);

        // T = 10 with a full window: u(t) - u(t-10)
        let mut w = ScoreWindow::new(10);
        w.push(40.0);
        for i in 1..=10 {
            w.push(40.0 + 0.2 * i as f64);
        }
        let mut t = tracker(GameKind::Minority, 0.0, 0, 42.0);
        t.score = 42.0;
        *w.buf.back_mut().unwrap() = 42.0;
        t.window = Some(w);
        assert!((t.effective_score() - 2.0).abs() < 1e-12);

        // T = 100 at t = 30: truncated at the run start, u(30) - u(0)
        let mut w = ScoreWindow::new(100);
        w.push(0.0);
        for i in 1..=30 {
            w.push(i as f64 * 1.4);
        }
        let mut t = tracker(GameKind::Minority, 0.0, 0, 42.0);
        *w.buf.back_mut().unwrap() = 42.0;
        t.window = Some(w);
        assert_eq!(t.effective_score(), 42.0);
    }

    #[test]
    fn window_holds_at_most_t_plus_one() {
        let mut w = ScoreWindow::new(3);
        for i in 0..10 {
            w.push(i as f64);
            assert!(w.len() <= 4);
        }
        assert_eq!(w.oldest(), 6.0);
        assert_eq!(w.newest(), 9.0);
    }

    #[test]
    fn selection_takes_strict_argmax() {
        let mut rng = rng::stream(0, rng::DOMAIN_TIEBREAK, 0);
        assert_eq!(select_strategy(&[3.0, 1.0], &mut rng), 0);
        assert_eq!(select_strategy(&[5.0], &mut rng), 0);
        assert_eq!(select_strategy(&[1.0, 2.0, 1.5], &mut rng), 1);
    }

    #[test]
    fn tied_selection_is_uniform() {
        let draws = 10_000usize;
        let mut zeros = 0usize;
        for i in 0..draws {
            let mut rng = rng::stream(7, rng::DOMAIN_TIEBREAK, i as u64);
            if select_strategy(&[2.0, 2.0], &mut rng) == 0 {
                zeros += 1;
            }
        }
        let f = zeros as f64 / draws as f64;
        let band = 3.0 * (0.25f64 / draws as f64).sqrt();
        assert!(
            (f - 0.5).abs() <= band,
            "tie frequency {f} outside 0.5 +/- {band}"
        );
    }

    #[test]
    fn minority_and_majority_are_exact_mirrors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut ming = tracker(GameKind::Minority, 5000.0, 0, 0.0);
        let mut majg = tracker(GameKind::Majority, 5000.0, 0, 0.0);
        for _ in 0..1000 {
            let a = Action::random(&mut rng);
            let dp = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            ming.settle(GameKind::Minority, a, dp);
            majg.settle(GameKind::Majority, a, dp);
            assert_eq!(ming.score, -majg.score);
        }
    }

    proptest! {
        /// Adding a common constant to all scores never changes the pick,
        /// given the same tie-break stream.
        #[test]
        fn selection_is_shift_invariant(
            scores in proptest::collection::vec(-1000.0f64..1000.0, 1..6),
            shift in -1000.0f64..1000.0,
            seed in 0u64..1000,
        ) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let mut rng_a = rng::stream(seed, rng::DOMAIN_TIEBREAK, 0);
            let mut rng_b = rng::stream(seed, rng::DOMAIN_TIEBREAK, 0);
            prop_assert_eq!(
                select_strategy(&scores, &mut rng_a),
                select_strategy(&shifted, &mut rng_b)
            );
        }

        /// The windowed score telescopes: u(t) - u(t-T) equals the sum of
        /// the last T per-step increments.
        #[test]
        fn window_score_telescopes(
            increments in proptest::collection::vec(-2.5f64..2.5, 1..200),
            window in 1u32..50,
        ) {
            let mut w = ScoreWindow::new(window);
            let mut u = 0.0f64;
            w.push(u);
            for (i, inc) in increments.iter().enumerate() {
                u += inc;
                w.push(u);
                let t = i + 1;
                let span = t.min(window as usize);
                let direct: f64 = increments[t - span..t].iter().sum();
                let via_window = w.newest() - w.oldest();
                prop_assert!((direct - via_window).abs() <= 1e-9 * direct.abs().max(1.0));
            }
        }
    }
}
