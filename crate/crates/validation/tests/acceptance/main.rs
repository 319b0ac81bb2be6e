//! Acceptance run: one line per criterion, non-zero exit if any fails.

mod classify;
mod network;
mod radar;
mod system;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Outcome of one criterion: `Ok(detail)` passes, `Err(detail)` fails.
pub type Outcome = Result<String, String>;

/// Shared between criteria: the trained session-independent model feeds the
/// system test.
#[derive(Default)]
pub struct Context {
    pub model: Option<radaract_core::gru::GruModel<f32>>,
    pub scratch: Option<tempfile::TempDir>,
}

impl Context {
    pub fn scratch(&mut self) -> PathBuf {
        self.scratch
            .get_or_insert_with(|| tempfile::tempdir().expect("scratch directory"))
            .path()
            .to_path_buf()
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn(&mut Context) -> Outcome,
}

/// Collects sub-checks; the criterion passes only if all of them do.
#[derive(Default)]
pub struct Checks {
    notes: Vec<String>,
    failed: bool,
}

impl Checks {
    pub fn check(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        if ok {
            self.notes.push(note);
        } else {
            self.failed = true;
            self.notes.push(format!("FAILED {note}"));
        }
    }

    /// Extra detail that does not decide the outcome.
    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn finish(self) -> Outcome {
        let text = self.notes.join("; ");
        if self.failed {
            Err(text)
        } else {
            Ok(text)
        }
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "derived radar parameters",
            budget: Duration::from_secs(1),
            run: radar::derived_parameters,
        },
        Criterion {
            id: 2,
            name: "range and Doppler fidelity",
            budget: Duration::from_secs(30),
            run: radar::dsp_fidelity,
        },
        Criterion {
            id: 3,
            name: "clutter removal",
            budget: Duration::from_secs(10),
            run: radar::clutter_removal,
        },
        Criterion {
            id: 4,
            name: "GRU correctness",
            budget: Duration::from_secs(120),
            run: classify::gru_correctness,
        },
        Criterion {
            id: 5,
            name: "six-class classification",
            budget: Duration::from_secs(15 * 60),
            run: classify::six_class,
        },
        Criterion {
            id: 6,
            name: "four-class classification",
            budget: Duration::from_secs(10 * 60),
            run: classify::four_class,
        },
        Criterion {
            id: 7,
            name: "end-to-end system test",
            budget: Duration::from_secs(5 * 60),
            run: system::scripted_day,
        },
        Criterion {
            id: 8,
            name: "wire protocol",
            budget: Duration::from_secs(60),
            run: network::wire_protocol,
        },
        Criterion {
            id: 9,
            name: "report oracle",
            budget: Duration::from_secs(60),
            run: network::report_oracle,
        },
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut ctx = Context::default();
    let mut failures = 0;
    let mut ran = 0;
    for c in &criteria {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = (c.run)(&mut ctx);
        let elapsed = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; FAILED runtime over {:.0?}", c.budget)),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "criterion {} {}: {} [{:.1} s] {}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
