//! Runner for the acceptance suite: each criterion is a closure returning
//! a one-line summary on success or a failure message, timed against its
//! budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type Outcome = Result<String, String>;

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub budget: Option<Duration>,
    pub check: Box<dyn Fn() -> Outcome>,
}

impl Criterion {
    pub fn new(id: u32, title: &'static str, check: impl Fn() -> Outcome + 'static) -> Self {
        Self {
            id,
            title,
            budget: None,
            check: Box::new(check),
        }
    }

    pub fn within(mut self, secs: u64) -> Self {
        self.budget = Some(Duration::from_secs(secs));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: u32,
    pub pass: bool,
    pub line: String,
}

/// Run one criterion. A panic counts as a failure; so does exceeding the
/// budget.
pub fn evaluate(c: &Criterion) -> Verdict {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| (c.check)()))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
    let elapsed = start.elapsed();
    let over = c.budget.filter(|b| elapsed > *b);
    let (pass, detail) = match (result, over) {
        (Ok(d), None) => (true, d),
        (Ok(d), Some(b)) => (false, format!("{d}; took {:.1}s, budget {}s", elapsed.as_secs_f64(), b.as_secs())),
        (Err(e), _) => (false, e),
    };
    let line = format!(
        "criterion {:>2} {} [{:.2}s] {}: {}",
        c.id,
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        c.title,
        detail
    );
    Verdict { id: c.id, pass, line }
}

/// Run every criterion in order, printing one line each. Returns true when
/// all pass.
pub fn run_all(criteria: &[Criterion]) -> bool {
    let mut all = true;
    for c in criteria {
        let v = evaluate(c);
        println!("{}", v.line);
        all &= v.pass;
    }
    all
}
