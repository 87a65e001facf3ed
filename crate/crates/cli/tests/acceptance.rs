//! Acceptance gate: seven criteria, one PASS/FAIL line each.
//!
//! Run alone with `cargo test -p qka-cli --test acceptance -- --nocapture`.

use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qka_core::adversary::AdversaryConfig;
use qka_core::experiment::trial_seed;
use qka_core::protocol::{run_session, EventKind, PartyId, SessionConfig, SessionResult};
use qka_core::quantum::{Basis, BellKind, PairState, Pauli, QuantumRegistry, TOLERANCE};
use qka_core::BitString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn qka(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qka"))
        .args(args)
        .env_remove("QKA_SEED")
        .output()
        .expect("qka binary runs")
}

fn run(config: &SessionConfig) -> SessionResult {
    run_session(config).expect("session runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:?}, budget {budget:?}"))?;
    Ok(took)
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> BitString {
    BitString::from_bits((0..n).map(|_| rng.random()).collect())
}

fn worked_example() -> Verdict {
    let start = Instant::now();
    let out = qka(&["attack-demo"]);
    let took = within_budget(start, Duration::from_secs(1))?;
    ensure(out.status.code() == Some(0), || format!("exit {:?}", out.status.code()))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let expected = [
        ("K_B xor R_B", "11"),
        ("recovered K_B", "10"),
        ("honest key", "01"),
        ("forged R'_C", "01"),
        ("Bob's measurement M_B", "00"),
        ("Bob's final key", "11"),
    ];
    for (name, value) in expected {
        let line = stdout
            .lines()
            .find(|l| l.contains(name))
            .ok_or_else(|| format!("no line for {name}"))?;
        ensure(line.contains("[ok]") && line.contains(&format!("= {value} ")), || {
            format!("{name}: {}", line.trim())
        })?;
    }
    ensure(stdout.contains("decoy failures: 0, aborted: no"), || {
        "attack was detected".into()
    })?;
    Ok(format!("6/6 values, undetected, {took:?}"))
}

fn honest_correctness() -> Verdict {
    let start = Instant::now();
    let mut sessions = 0;
    for n in [2, 4, 8, 16, 32, 64] {
        for seed in 0..100 {
            let result = run(&SessionConfig::new(n, seed));
            let s = &result.details.secrets;
            let expected = &(&s.a.k ^ &s.b.k) ^ &s.c.k;
            ensure(!result.is_aborted(), || format!("n={n} seed={seed} aborted"))?;
            ensure(result.events.decoy_totals().1 == 0, || {
                format!("n={n} seed={seed} decoy failure")
            })?;
            for (id, key) in result.keys().unwrap().iter() {
                ensure(*key == expected, || {
                    format!("n={n} seed={seed} party {id} key {key} != {expected}")
                })?;
            }
            sessions += 1;
        }
    }
    let took = within_budget(start, Duration::from_secs(10))?;
    Ok(format!("{sessions} sessions agree, {took:?}"))
}

fn collusion_success() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..1000 {
        let target = random_bits(&mut rng, 8);
        let result = run(&SessionConfig::new(8, seed).with_adversary(AdversaryConfig::absolute(target.clone())));
        let bob = &result.details.secrets.b;
        let state = result.details.collusion.as_ref().ok_or("no collusion state")?;
        ensure(!result.is_aborted(), || format!("seed {seed} aborted"))?;
        ensure(result.events.decoy_totals().1 == 0, || {
            format!("seed {seed} decoy failure")
        })?;
        ensure(result.keys().unwrap().b == target, || {
            format!("seed {seed}: Bob's key is not the target")
        })?;
        ensure(state.learned_kb.as_ref() == Some(&bob.k), || {
            format!("seed {seed}: K_B not recovered")
        })?;
    }
    for seed in 0..1000 {
        let offset = random_bits(&mut rng, 8);
        let result = run(&SessionConfig::new(8, seed).with_adversary(AdversaryConfig::delta(offset.clone())));
        let s = &result.details.secrets;
        let honest = &(&s.a.k ^ &s.b.k) ^ &s.c.k;
        ensure(&result.keys().unwrap().b ^ &honest == offset, || {
            format!("delta seed {seed} missed offset")
        })?;
    }
    Ok("absolute 1000/1000, K_B 1000/1000, delta 1000/1000".into())
}

fn quantum_invisibility() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..100 {
        let honest = SessionConfig::new(8, seed);
        let attacked = honest
            .clone()
            .with_adversary(AdversaryConfig::absolute(random_bits(&mut rng, 8)));
        let (h, a) = (run(&honest), run(&attacked));
        ensure(h.details.secrets == a.details.secrets, || {
            format!("seed {seed}: secrets differ")
        })?;
        let (mh, ma) = (&h.details.measurements.a, &a.details.measurements.a);
        ensure(mh.is_some() && mh == ma, || {
            format!("seed {seed}: M_A {mh:?} vs {ma:?}")
        })?;
    }
    Ok("M_A identical in 100/100 pairs".into())
}

fn eavesdropper_statistics() -> Verdict {
    let start = Instant::now();
    // oracle: a Phi+ decoy with both halves Z-measured, then checked in the Bell basis
    let mut reg = QuantumRegistry::new(0);
    let (p, q) = reg.new_bell_pair(BellKind::PhiPlus);
    reg.measure_z(p).unwrap();
    reg.measure_z(q).unwrap();
    let p_fail = 1.0 - reg.outcome_distribution(p.pair, Basis::Bell).unwrap()[BellKind::PhiPlus.index()];
    let decoys = SessionConfig::new(4, 0).decoy_pairs_per_hop;
    let p_abort = 1.0 - (1.0 - p_fail).powi(decoys as i32);

    const TRIALS: u64 = 10_000;
    let (mut pairs, mut failures, mut aborts) = (0usize, 0usize, 0u64);
    for i in 0..TRIALS {
        let cfg =
            SessionConfig::new(4, trial_seed(2024, i)).with_adversary(AdversaryConfig::intercept(PartyId::A, 0, 1.0));
        let result = run(&cfg);
        let (p, f) = result
            .events
            .events()
            .iter()
            .find_map(|e| match e.kind {
                EventKind::DecoyCheck {
                    round: 0,
                    from: PartyId::A,
                    pairs,
                    failures,
                    ..
                } => Some((pairs, failures)),
                _ => None,
            })
            .ok_or("attacked hop was never checked")?;
        pairs += p;
        failures += f;
        aborts += u64::from(result.is_aborted());
    }
    let fail_rate = failures as f64 / pairs as f64;
    let abort_rate = aborts as f64 / TRIALS as f64;
    let fail_sigma = (p_fail * (1.0 - p_fail) / pairs as f64).sqrt();
    let abort_sigma = (p_abort * (1.0 - p_abort) / TRIALS as f64).sqrt();
    ensure(pairs >= 10_000, || format!("only {pairs} decoy pairs"))?;
    ensure((fail_rate - 0.5).abs() <= 0.015, || format!("failure rate {fail_rate}"))?;
    ensure((abort_rate - 0.75).abs() <= 0.02, || format!("abort rate {abort_rate}"))?;
    ensure((fail_rate - p_fail).abs() <= 3.0 * fail_sigma, || {
        format!("failure rate {fail_rate} outside 3 sigma of {p_fail}")
    })?;
    ensure((abort_rate - p_abort).abs() <= 3.0 * abort_sigma, || {
        format!("abort rate {abort_rate} outside 3 sigma of {p_abort}")
    })?;
    let took = within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "failure {fail_rate:.4} (oracle {p_fail:.3}) over {pairs} pairs, abort {abort_rate:.4} (oracle {p_abort:.3}), {took:?}"
    ))
}

fn quantum_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let paulis = Pauli::ALL;

    for chain in 0..1000 {
        let mut reg = QuantumRegistry::new(chain);
        let (p, q) = reg.new_bell_pair(BellKind::ALL[rng.random_range(0..4)]);
        for _ in 0..rng.random_range(1..50) {
            let who = if rng.random() { p } else { q };
            match rng.random_range(0..6) {
                0 => drop(reg.measure_z(who).unwrap()),
                1 => drop(reg.bell_measure(p, q).unwrap()),
                _ => reg.apply_pauli(who, paulis[rng.random_range(0..4)]).unwrap(),
            }
            let norm = reg.state(p.pair).unwrap().norm_sqr();
            ensure((norm - 1.0).abs() < TOLERANCE, || format!("chain {chain}: norm {norm}"))?;
        }
    }

    for _ in 0..200 {
        let amps: [Complex64; 4] =
            std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut reg = QuantumRegistry::new(0);
        let (p, q) = reg.insert(PairState::from_amplitudes(amps));
        let before = reg.state(p.pair).unwrap().clone();
        for op in paulis {
            for who in [p, q] {
                reg.apply_pauli(who, op).unwrap();
                reg.apply_pauli(who, op).unwrap();
                ensure(reg.state(p.pair).unwrap().equivalent_to(before.amplitudes()), || {
                    format!("{op:?} twice is not the identity")
                })?;
            }
        }
    }

    let mut reg = QuantumRegistry::new(7);
    for trial in 0..10_000 {
        let amps: [Complex64; 4] =
            std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let (p, q) = reg.insert(PairState::from_amplitudes(amps));
        let first = reg.bell_measure(p, q).unwrap();
        let second = reg.bell_measure(p, q).unwrap();
        ensure(first == second, || format!("trial {trial}: {first} then {second}"))?;
    }

    let table = [
        (BellKind::PhiPlus, BellKind::PsiPlus),
        (BellKind::PsiPlus, BellKind::PhiPlus),
        (BellKind::PhiMinus, BellKind::PsiMinus),
        (BellKind::PsiMinus, BellKind::PhiMinus),
    ];
    for (from, to) in table {
        let mut reg = QuantumRegistry::new(8);
        let (p, q) = reg.new_bell_pair(from);
        reg.apply_pauli(q, Pauli::X).unwrap();
        ensure(reg.state(p.pair).unwrap().equivalent_to(&to.amplitudes()), || {
            format!("X on {from} is not {to}")
        })?;
    }

    // Phi states give equal Z outcomes, Psi states opposite ones, each marginal fair
    for kind in BellKind::ALL {
        let dist = PairState::bell(kind).distribution(Basis::Computational);
        let equal = dist[0] + dist[3];
        let want = if kind.bit_flip_component() { 0.0 } else { 1.0 };
        ensure((equal - want).abs() < TOLERANCE, || {
            format!("{kind}: P(equal) = {equal}")
        })?;
        ensure((dist[0] + dist[1] - 0.5).abs() < TOLERANCE, || {
            format!("{kind}: biased marginal")
        })?;
        let mut reg = QuantumRegistry::new(9);
        for _ in 0..1000 {
            let (p, q) = reg.new_bell_pair(kind);
            let (a, b) = (reg.measure_z(p).unwrap(), reg.measure_z(q).unwrap());
            ensure((a == b) == (want == 1.0), || {
                format!("{kind}: sampled Z outcomes {a} {b}")
            })?;
        }
    }
    Ok("norm, involution, repeatability 10^4, X table, Z correlations".into())
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("qka-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let invocations: [&[&str]; 6] = [
        &["run", "--n", "8", "--seed", "17"],
        &[
            "run",
            "--n",
            "6",
            "--seed",
            "3",
            "--adversary",
            "eve",
            "--tolerance",
            "1",
        ],
        &["run", "--n", "8", "--seed", "5", "--adversary", "collusion"],
        &["attack-demo", "--seed", "9"],
        &[
            "montecarlo",
            "--n",
            "4,8",
            "--trials",
            "200",
            "--adversary",
            "eve",
            "--fraction",
            "0.5,1",
            "--seed",
            "1",
        ],
        &[
            "montecarlo",
            "--n",
            "4",
            "--trials",
            "200",
            "--adversary",
            "collusion",
            "--format",
            "json",
            "--seed",
            "1",
        ],
    ];
    for args in invocations {
        let first = qka(args);
        let second = qka(args);
        ensure(!first.stdout.is_empty(), || format!("{args:?} printed nothing"))?;
        ensure(first.stdout == second.stdout && first.status == second.status, || {
            format!("{args:?} differs between invocations")
        })?;
    }
    let file = dir.join("out.json");
    let file_arg = file.to_str().unwrap();
    let mut written = Vec::new();
    for _ in 0..2 {
        qka(&["run", "--n", "4", "--seed", "2", "--output", file_arg]);
        written.push(std::fs::read(&file).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(written[0] == written[1], || "--output files differ".into())?;
    Ok("run, attack-demo, montecarlo csv/json byte-identical".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("1 worked collusion example", worked_example),
        ("2 honest correctness", honest_correctness),
        ("3 collusion manipulation success", collusion_success),
        ("4 attack invisible at quantum level", quantum_invisibility),
        ("5 eavesdropper detection statistics", eavesdropper_statistics),
        ("6 quantum core algebra", quantum_algebra),
        ("7 determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                println!("[FAIL] {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
