use std::path::PathBuf;

use qka_core::adversary::AdversaryConfig;
use qka_core::protocol::{run_session, PartySecrets, PerParty, SessionConfig};
use qka_core::BitString;

use crate::{emit, Failure, EXIT_MISMATCH, EXIT_OK};

const SECRETS: [(&str, &str); 3] = [("11", "00"), ("10", "01"), ("00", "11")];

fn bits(s: &str) -> BitString {
    s.parse().expect("literal bit string")
}

/// Runs the two-bit scenario with Alice and Charlie colluding against Bob and
/// checks each intermediate quantity. With the default target of `11` every
/// value matches the published walk-through.
pub fn cmd_attack_demo(target: &str, seed: u64, output: Option<&PathBuf>) -> Result<u8, Failure> {
    let target: BitString = target
        .parse()
        .ok()
        .filter(|t: &BitString| t.len() == 2)
        .ok_or_else(|| Failure::usage(format!("--target must be two bits, got {target:?}")))?;

    let secrets = PerParty::from_fn(|id| {
        let (k, r) = SECRETS[id as usize];
        PartySecrets { k: bits(k), r: bits(r) }
    });
    let config = SessionConfig::new(2, seed)
        .with_secrets(secrets)
        .with_adversary(AdversaryConfig::absolute(target.clone()));
    let result = run_session(&config)?;

    let honest = bits("01");
    let true_rc = bits("11");
    let collusion = result
        .details
        .collusion
        .clone()
        .unwrap_or_else(|| unreachable!("collusion configured"));
    let missing = || BitString::default();
    let checks: [(&str, BitString, BitString); 6] = [
        (
            "K_B xor R_B (early Bell measurement)",
            bits("11"),
            collusion.learned_kb_xor_rb.clone().unwrap_or_else(missing),
        ),
        (
            "recovered K_B",
            bits("10"),
            collusion.learned_kb.clone().unwrap_or_else(missing),
        ),
        (
            "honest key K_A xor K_B xor K_C",
            honest.clone(),
            collusion.honest_key.clone().unwrap_or_else(missing),
        ),
        (
            "forged R'_C",
            &(&true_rc ^ &honest) ^ &target,
            collusion.forged_r.clone().unwrap_or_else(missing),
        ),
        (
            "Bob's measurement M_B",
            bits("00"),
            result.details.measurements.b.clone().unwrap_or_else(missing),
        ),
        (
            "Bob's final key",
            target.clone(),
            result.keys().map(|k| k.b.clone()).unwrap_or_else(missing),
        ),
    ];

    println!("Collusion demo: Alice and Charlie against Bob, 2-bit key");
    println!("  K_A=11 K_B=10 K_C=00  R_A=00 R_B=01 R_C=11  target={target}");
    let mut first_mismatch = None;
    for (name, expected, actual) in &checks {
        let ok = expected == actual;
        println!(
            "  [{}] {name:<40} = {actual} (expected {expected})",
            if ok { "ok" } else { "MISMATCH" }
        );
        if !ok && first_mismatch.is_none() {
            first_mismatch = Some(*name);
        }
    }
    let (_, decoy_failures) = result.events.decoy_totals();
    println!(
        "  decoy failures: {decoy_failures}, aborted: {}",
        if result.is_aborted() { "yes" } else { "no" }
    );
    if first_mismatch.is_none() && (decoy_failures != 0 || result.is_aborted()) {
        first_mismatch = Some("detection (decoy failures or abort)");
    }

    let json = result.to_json() + "\n";
    match output {
        Some(path) => emit(&Some(path.clone()), &json)?,
        None => print!("{json}"),
    }

    Ok(match first_mismatch {
        None => EXIT_OK,
        Some(name) => {
            eprintln!("error: first divergent quantity: {name}");
            EXIT_MISMATCH
        }
    })
}
