//! Dynamic dispatch is the reference semantics: compiled modes must match
//! it exactly, and checking mode must never see a value outside its
//! inferred type.

mod support;

use mdl::engine::Mode;
use support::run::{big, load, run};

#[test]
fn fuzzed_programs_agree_across_modes() {
    let (succeeded, total) = big(|| {
        let mut succeeded = 0;
        let total = 300u64;
        for seed in 1000..1000 + total {
            let src = support::fuzz::program(seed);
            let m = load(&src);
            let reference = run(&m, Mode::Dynamic, "main", &[]);
            for mode in [Mode::Optimized, Mode::Checking] {
                let r = run(&m, mode, "main", &[]);
                assert_eq!(
                    (&r.outcome, &r.stdout),
                    (&reference.outcome, &reference.stdout),
                    "seed {seed} in {} mode\n{src}",
                    mode.as_str()
                );
                assert_eq!(r.violations, 0, "seed {seed}: checking-mode violations\n{src}");
            }
            succeeded += usize::from(reference.outcome.is_ok());
        }
        (succeeded, total as usize)
    });
    // the generator should mostly produce programs that run to completion
    assert!(succeeded * 2 > total, "{succeeded}/{total} fuzzed programs succeeded");
}

#[test]
fn fuzzing_is_deterministic() {
    assert_eq!(support::fuzz::program(5), support::fuzz::program(5));
    assert_ne!(support::fuzz::program(5), support::fuzz::program(6));
}
