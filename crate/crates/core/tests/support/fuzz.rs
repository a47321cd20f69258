//! Seeded random programs that stress dispatch: overlapping methods,
//! type-unstable accumulators, arrays, structs and run-time errors.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ANNOTATIONS: &[&str] =
    &["", "::Int64", "::Float64", "::Number", "::Real", "::Int64", "::Float64", "::Animal", "::Dog", "::Bool"];

/// Leaves that are always numbers inside `main`.
const MAIN_LEAVES: &[&str] = &["acc", "i", "v[1]", "v[2]", "d.w", "length(v)"];

struct Gen {
    rng: ChaCha8Rng,
    /// Names of the generic functions defined so far.
    funcs: Vec<(String, usize)>,
}

impl Gen {
    fn lit(&mut self) -> String {
        match self.rng.random_range(0..4) {
            0 => format!("{}", self.rng.random_range(-3..10)),
            1 => format!("{:.1}", self.rng.random_range(-20..40) as f64 / 4.0),
            2 => ["true", "false"].choose(&mut self.rng).unwrap().to_string(),
            _ => format!("{}", self.rng.random_range(0..5)),
        }
    }

    fn expr(&mut self, vars: &[&str], depth: usize) -> String {
        if depth == 0 || self.rng.random_bool(0.2) {
            return if self.rng.random_bool(0.7) && !vars.is_empty() {
                vars.choose(&mut self.rng).unwrap().to_string()
            } else {
                self.lit()
            };
        }
        let d = depth - 1;
        match self.rng.random_range(0..16) {
            0..=3 => {
                let op = ["+", "-", "*", "+", "*"].choose(&mut self.rng).unwrap();
                format!("({} {op} {})", self.expr(vars, d), self.expr(vars, d))
            }
            4..=6 if !self.funcs.is_empty() => {
                let (f, n) = self.funcs.choose(&mut self.rng).unwrap().clone();
                let args: Vec<String> = (0..n).map(|_| self.expr(vars, d)).collect();
                format!("{f}({})", args.join(", "))
            }
            7 => format!("({} ? {} : {})", self.cond(vars, d), self.expr(vars, d), self.expr(vars, d)),
            8 => format!("abs({})", self.expr(vars, d)),
            9 => format!("max({}, {})", self.expr(vars, d), self.expr(vars, d)),
            10 => format!("Dog({}).w", self.rng.random_range(-2..6)),
            11 => format!("Cat({}).w", self.lit_num()),
            12 => format!("float({})", self.expr(vars, d)),
            13 => format!("div({}, {})", self.rng.random_range(-9..30), self.rng.random_range(-1..4)),
            14 => format!("[{}, {}, {}][{}]", self.lit(), self.lit(), self.lit(), self.rng.random_range(0..9).min(3)),
            _ => format!("length([{}, {}])", self.expr(vars, d), self.lit()),
        }
    }

    fn cond(&mut self, vars: &[&str], depth: usize) -> String {
        match self.rng.random_range(0..4) {
            0 => format!("{} < {}", self.expr(vars, depth), self.expr(vars, depth)),
            1 => format!("{} == {}", self.expr(vars, depth), self.expr(vars, depth)),
            2 => format!(
                "isa({}, {})",
                self.expr(vars, depth),
                ["Int64", "Float64", "Number", "Animal", "Bool"].choose(&mut self.rng).unwrap()
            ),
            _ => format!("{} <= {}", self.expr(vars, depth), self.expr(vars, depth)),
        }
    }

    fn function(&mut self, name: &str, nargs: usize, out: &mut String) {
        let params = ["x", "y", "z"];
        let nmethods = self.rng.random_range(1..=3);
        let mut seen = Vec::new();
        for _ in 0..nmethods {
            let sig: Vec<String> =
                (0..nargs).map(|i| format!("{}{}", params[i], ANNOTATIONS.choose(&mut self.rng).unwrap())).collect();
            if seen.contains(&sig) {
                continue;
            }
            seen.push(sig.clone());
            let vars = &params[..nargs];
            if self.rng.random_bool(0.6) {
                out.push_str(&format!("{name}({}) = {}\n", sig.join(", "), self.expr(vars, 3)));
            } else {
                out.push_str(&format!("function {name}({})\n", sig.join(", ")));
                out.push_str(&format!("    t = {}\n", self.expr(vars, 2)));
                out.push_str(&format!("    if {}\n", self.cond(vars, 1)));
                out.push_str(&format!("        t = {}\n", self.expr(&[vars, &["t"]].concat(), 2)));
                out.push_str("    end\n    t\nend\n");
            }
        }
        if self.rng.random_bool(0.7) {
            // a fallback so most calls find some method
            let sig: Vec<&str> = params[..nargs].to_vec();
            out.push_str(&format!("{name}({}) = {}\n", sig.join(", "), self.lit_num()));
        }
        self.funcs.push((name.to_string(), nargs));
    }

    fn main(&mut self, out: &mut String) {
        let vars = MAIN_LEAVES;
        out.push_str("function main()\n");
        out.push_str(&format!("    acc = {}\n", self.lit()));
        out.push_str(&format!("    v = [{}, {}, {}]\n", self.lit_num(), self.lit_num(), self.lit_num()));
        out.push_str(&format!("    d = Dog({})\n", self.rng.random_range(0..5)));
        out.push_str(&format!("    for i = 1:{}\n", self.rng.random_range(1..6)));
        for _ in 0..self.rng.random_range(1..4) {
            match self.rng.random_range(0..5) {
                0 => out.push_str(&format!(
                    "        if {}\n            acc = {}\n        else\n            acc = {}\n        end\n",
                    self.cond(vars, 1),
                    self.expr(vars, 2),
                    self.expr(vars, 2)
                )),
                1 => out.push_str(&format!("        v[{}] = {}\n", self.rng.random_range(1..4), self.expr(vars, 1))),
                2 => out.push_str(&format!("        println({})\n", self.expr(vars, 2))),
                _ => out.push_str(&format!("        acc = {}\n", self.expr(vars, 3))),
            }
        }
        out.push_str("    end\n");
        if self.rng.random_bool(0.3) {
            out.push_str(&format!(
                "    try\n        acc = {}\n    catch\n        acc = -1\n    end\n",
                self.expr(&["acc", "v[3]", "d.w"], 3)
            ));
        }
        out.push_str("    println(acc)\n");
        out.push_str(if self.rng.random_bool(0.5) { "    (acc, v)\n" } else { "    acc\n" });
        out.push_str("end\n");
    }

    fn lit_num(&mut self) -> String {
        format!("{:.1}", self.rng.random_range(-8..8) as f64 / 2.0)
    }
}

pub fn program(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), funcs: Vec::new() };
    let mut out = String::from(
        "abstract Animal\ntype Dog <: Animal\n    w::Int64\nend\ntype Cat <: Animal\n    w::Float64\nend\n\n",
    );
    for k in 0..g.rng.random_range(2..6) {
        let nargs = g.rng.random_range(1..=2);
        g.function(&format!("f{k}"), nargs, &mut out);
    }
    g.main(&mut out);
    out
}
