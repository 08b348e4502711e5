//! Generator for quadratic benchmark families built from phases.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const BENCH_SEED: u64 = 0x5eed_0022;

/// Phase shapes as (lhs, rhs) with `x`, `y` standing for the phase's own
/// variables.
const SAT_PHASES: [(&str, &str); 2] = [("xaby", "ybax"), ("xab", "bax")];
const UNSAT_PHASES: [(&str, &str); 2] = [("xaay", "ybax"), ("xaa", "bax")];

struct Instance {
    vars: Vec<String>,
    lhs: Vec<String>,
    rhs: Vec<String>,
}

fn side(shape: &str, k: usize, vars: &mut Vec<String>, out: &mut Vec<String>) {
    for c in shape.chars() {
        match c {
            'x' | 'y' => {
                let v = format!("{c}{k}");
                if !vars.contains(&v) {
                    vars.push(v.clone());
                }
                out.push(v);
            }
            l => out.push(format!("\"{l}\"")),
        }
    }
}

fn instance(phases: &[(&str, &str)]) -> Instance {
    let mut inst = Instance { vars: Vec::new(), lhs: Vec::new(), rhs: Vec::new() };
    for (k, (l, r)) in phases.iter().enumerate() {
        side(l, k + 1, &mut inst.vars, &mut inst.lhs);
        side(r, k + 1, &mut inst.vars, &mut inst.rhs);
    }
    inst
}

fn concat(parts: &[String]) -> String {
    match parts {
        [p] => p.clone(),
        _ => format!("(str.++ {})", parts.join(" ")),
    }
}

fn render(inst: &Instance, status: &str) -> String {
    let mut out = String::from("(set-logic QF_S)\n");
    out.push_str(&format!("(set-info :status {status})\n"));
    for v in &inst.vars {
        out.push_str(&format!("(declare-fun {v} () String)\n"));
    }
    out.push_str(&format!("(assert (= {} {}))\n", concat(&inst.lhs), concat(&inst.rhs)));
    out.push_str("(check-sat)\n");
    out
}

/// Writes `count` instances with `phases` phases each, alternating
/// satisfiable and unsatisfiable ones. Satisfiable instances compose
/// satisfiable phases; unsatisfiable ones compose unsatisfiable phases, so
/// the letter `a` occurs once more on the left per phase.
pub fn gen_bench(out: &Path, phases: usize, count: usize) -> io::Result<Vec<PathBuf>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if phases == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "at least one phase"));
    }
    fs::create_dir_all(out)?;
    let mut rng = StdRng::seed_from_u64(BENCH_SEED ^ phases as u64);
    let mut files = Vec::new();
    for i in 0..count {
        let sat = i % 2 == 0;
        let pool = if sat { &SAT_PHASES } else { &UNSAT_PHASES };
        // the first phase cycles through the pool so both shapes appear
        let mut chosen = vec![pool[(i / 2) % pool.len()]];
        for _ in 1..phases {
            chosen.push(pool[rng.gen_range(0..pool.len())]);
        }
        let status = if sat { "sat" } else { "unsat" };
        let path = out.join(format!("quad-{:03}-{phases}-{status}.smt2", i + 1));
        fs::write(&path, render(&instance(&chosen), status))?;
        files.push(path);
    }
    Ok(files)
}
