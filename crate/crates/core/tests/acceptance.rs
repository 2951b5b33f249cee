//! The artifact's quality gate: every guarantee the workspace claims, each
//! checked at its stated tolerance with a fixed seed and a printed verdict
//! line. Run with `--nocapture` to see the lines on success.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use twophase_core::adversary::{
    expected_matrix, fixed_avf_impersonation, run_attack, run_attack_matrix,
    verify_mqv_functionality, verify_sm2_functionality, Profile,
};
use twophase_core::entropy::{
    ctw_ratio, nist_min_entropy, reports_to_json, run_curve_report, FunctionTag, SampleSet,
    DEFAULT_DEPTH, DEFAULT_SAMPLES,
};
use twophase_core::group::{AvfPolicy, Group, GroupError};
use twophase_core::protocol::{
    builtin_scenario, matching, paired_shared_secret, run_scenario, Backing, Environment,
};
use twophase_core::tpm::{KeyHandle, Scheme, TpmError, TpmMode, TpmState};

const SCHEMES: [Scheme; 3] = [Scheme::Ecdh, Scheme::Ecmqv, Scheme::Sm2];

#[test]
fn c1_matching_sessions_agree_on_keys_across_backings() {
    let start = Instant::now();
    let backing_pairs = [
        (Backing::TpmOriginal, Backing::TpmOriginal),
        (Backing::TpmRevised, Backing::TpmRevised),
        (Backing::TpmRevised, Backing::Software),
        (Backing::Software, Backing::Software),
    ];
    for (curve, runs) in [("toy", 50u64), ("p256", 5)] {
        for (si, scheme) in SCHEMES.into_iter().enumerate() {
            for (pi, (initiator, responder)) in backing_pairs.into_iter().enumerate() {
                for run in 0..runs {
                    let seed = 900_000 + (si as u64) * 10_000 + (pi as u64) * 1_000 + run;
                    let group = Group::by_name(curve).unwrap();
                    let mut env = Environment::new(group, seed);
                    env.register_party("alice", initiator, scheme).unwrap();
                    env.register_party("bob", responder, scheme).unwrap();
                    let (x, sa) = env.initiate(scheme, "alice", "bob").unwrap();
                    let (y, sb) = env.respond(scheme, "bob", "alice", &x).unwrap();
                    env.complete(scheme, "alice", "bob", &x, &y).unwrap();
                    assert!(matching(env.session(sa), env.session(sb)));
                    let ka = env.session(sa).key().expect("initiator key");
                    let kb = env.session(sb).key().expect("responder key");
                    assert_eq!(
                        ka.as_bytes(),
                        kb.as_bytes(),
                        "{curve} {} {initiator:?}<->{responder:?} run {run}",
                        scheme.name()
                    );
                }
            }
        }
    }
    assert!(start.elapsed() < Duration::from_secs(30));
    println!("criterion 1 (matching sessions derive byte-equal keys): pass");
}

#[test]
fn c2_mqv_and_sm2_identities_hold_on_every_backend() {
    for group in [
        Group::toy(),
        Group::p256(),
        Group::by_name("sm2p256").unwrap(),
        Group::fixed_lsb_mock(8, 5),
    ] {
        let mut rng = ChaCha20Rng::seed_from_u64(0x1dea);
        let cofactor = group.scalar_from_u64(group.cofactor());
        for trial in 0..100 {
            let (a, b) = (group.sample_scalar(&mut rng), group.sample_scalar(&mut rng));
            let (x, y) = (group.sample_scalar(&mut rng), group.sample_scalar(&mut rng));
            let pa = group.exp_generator(&a).unwrap();
            let pb = group.exp_generator(&b).unwrap();
            let px = group.exp_generator(&x).unwrap();
            let py = group.exp_generator(&y).unwrap();

            let d = group.avf(&px, AvfPolicy::Mqv).unwrap();
            let e = group.avf(&py, AvfPolicy::Mqv).unwrap();
            let lhs_exp =
                group.scalar_mul(&cofactor, &group.scalar_add(&x, &group.scalar_mul(&d, &a)));
            let rhs_exp =
                group.scalar_mul(&cofactor, &group.scalar_add(&y, &group.scalar_mul(&e, &b)));
            let lhs_base = group.mul(&py, &group.exp(&pb, &e).unwrap()).unwrap();
            let rhs_base = group.mul(&px, &group.exp(&pa, &d).unwrap()).unwrap();
            assert_eq!(
                group.exp(&lhs_base, &lhs_exp).unwrap(),
                group.exp(&rhs_base, &rhs_exp).unwrap(),
                "mqv identity, {} trial {trial}",
                group.name()
            );

            let d = group.avf(&px, AvfPolicy::Sm2).unwrap();
            let e = group.avf(&py, AvfPolicy::Sm2).unwrap();
            let lhs_exp =
                group.scalar_mul(&cofactor, &group.scalar_add(&a, &group.scalar_mul(&d, &x)));
            let rhs_exp =
                group.scalar_mul(&cofactor, &group.scalar_add(&b, &group.scalar_mul(&e, &y)));
            let lhs_base = group.mul(&pb, &group.exp(&py, &e).unwrap()).unwrap();
            let rhs_base = group.mul(&pa, &group.exp(&px, &d).unwrap()).unwrap();
            assert_eq!(
                group.exp(&lhs_base, &lhs_exp).unwrap(),
                group.exp(&rhs_base, &rhs_exp).unwrap(),
                "sm2 identity, {} trial {trial}",
                group.name()
            );
        }
    }
    println!("criterion 2 (MQV and SM2 two-sided identities, exact): pass");
}

#[test]
fn c3_attack_matrix_reproduces_the_expected_table() {
    let start = Instant::now();
    const OK: &str = "ok";
    const REG: &str = "registration-blocked";
    const Z: &str = "z-unavailable";
    const PT: &str = "plaintext-unavailable";
    const DIFF: &str = "keys-differ";
    let expected: [(&str, [&str; 5]); 9] = [
        ("kaliski-uks", [OK, OK, REG, Z, REG]),
        ("sm2-uks-shifted-key", [OK, OK, REG, Z, REG]),
        ("sm2-uks-known-key", [OK, OK, PT, Z, Z]),
        ("fixed-avf-impersonation-mock", [OK, OK, OK, OK, OK]),
        ("fixed-avf-impersonation-toy", [DIFF, DIFF, DIFF, DIFF, DIFF]),
        ("um-z1-leak", [OK, Z, Z, Z, Z]),
        ("um-kci", [OK, PT, PT, PT, PT]),
        ("mqv-kci", [DIFF, PT, PT, PT, PT]),
        ("sm2-kci", [DIFF, PT, PT, PT, PT]),
    ];

    for (i, (attack, outcomes)) in expected.iter().enumerate() {
        for (j, profile) in Profile::ALL.iter().enumerate() {
            let seed = 7u64.wrapping_add(((i * Profile::ALL.len() + j) as u64) * 1009);
            let report = run_attack(attack, *profile, seed).expect("known attack");
            let outcome = if report.succeeded {
                OK.to_string()
            } else {
                report.reason.clone().expect("blocked cells carry a reason")
            };
            assert_eq!(outcome, outcomes[j], "{attack} under {}", profile.name());
            if report.succeeded {
                let evidence = report.evidence.as_ref().expect("success carries evidence");
                assert!(!evidence.victim_key.is_empty());
                assert_eq!(
                    evidence.victim_key, evidence.attacker_key,
                    "{attack} under {}: derivations disagree",
                    profile.name()
                );
            }
        }
    }

    let matrix = run_attack_matrix(7);
    assert!(matrix.diff(&expected_matrix()).is_empty());

    for (group, tag) in [(Group::toy(), "toy"), (Group::p256(), "p256")] {
        let report = fixed_avf_impersonation(&group, tag, Profile::SoftwareMixed, 11);
        assert!(!report.succeeded, "varying-avf impersonation must fail on {tag}");
        assert_eq!(report.reason.as_deref(), Some("keys-differ"));
    }
    assert!(start.elapsed() < Duration::from_secs(60));
    println!("criterion 3 (attack outcome matrix, exact): pass");
}

#[test]
fn c4_tpm_enforces_single_use_binding_and_secrecy() {
    let group = Group::toy();
    let peers = group.sample_points(99, 2);

    let mut tpm = TpmState::new(Group::toy(), TpmMode::Original, 41);
    let (_, handle) = tpm.tpm2_create(Scheme::Ecmqv, "toy").unwrap();
    let (_, ctr) = tpm.tpm2_ec_ephemeral().unwrap();
    tpm.tpm2_zgen_2phase(Scheme::Ecmqv, handle, ctr, &peers[0], &peers[1]).unwrap();
    let reused = tpm.tpm2_zgen_2phase(Scheme::Ecmqv, handle, ctr, &peers[0], &peers[1]);
    assert!(matches!(reused, Err(TpmError::SlotConsumed { .. })));

    let (_, ctr2) = tpm.tpm2_ec_ephemeral().unwrap();
    let crossed = tpm.tpm2_zgen_2phase(Scheme::Sm2, handle, ctr2, &peers[0], &peers[1]);
    assert!(matches!(crossed, Err(TpmError::SchemeMismatch { .. })));

    let forged = group.element_from_affine(BigUint::from(1u32), BigUint::from(1u32));
    assert!(matches!(forged, Err(GroupError::OffCurve { .. })));
    let foreign = Group::p256().sample_points(5, 1).remove(0);
    let denied = tpm.tpm2_zgen_2phase(Scheme::Ecmqv, handle, ctr2, &foreign, &peers[1]);
    assert!(matches!(denied, Err(TpmError::OffCurvePoint { .. })));

    let mut rev = TpmState::new(Group::toy(), TpmMode::Revised, 42);
    let (_, rev_handle) = rev.tpm2_create(Scheme::Sm2, "toy").unwrap();
    let (_, rev_ctr) = rev.tpm2_ec_ephemeral().unwrap();
    rev.tpm2_zgen_2phase_rev(
        Scheme::Sm2, rev_handle, rev_ctr, &peers[0], &peers[1], "alice", "bob", true,
    )
    .unwrap();
    let rev_reused = rev.tpm2_zgen_2phase_rev(
        Scheme::Sm2, rev_handle, rev_ctr, &peers[0], &peers[1], "alice", "bob", true,
    );
    assert!(matches!(rev_reused, Err(TpmError::SlotConsumed { .. })));

    let mut commands = 0usize;
    for instance in 0..40u64 {
        let mode = if instance % 2 == 0 { TpmMode::Original } else { TpmMode::Revised };
        let mut tpm = TpmState::new(Group::toy(), mode, 1_000 + instance);
        let mut rng = ChaCha20Rng::seed_from_u64(2_000 + instance);
        let mut handles: Vec<KeyHandle> = Vec::new();
        let mut ctrs: Vec<u64> = Vec::new();
        let mut points = group.sample_points(3_000 + instance, 8);
        points.push(group.identity());
        let pick_point =
            |rng: &mut ChaCha20Rng| points[rng.next_u32() as usize % points.len()].clone();

        for _ in 0..255 {
            commands += 1;
            let scheme = SCHEMES[rng.next_u32() as usize % 3];
            let curve = if rng.next_u32() % 8 == 0 { "p256" } else { "toy" };
            let action = rng.next_u32() % 6;
            match action {
                0 => {
                    if let Ok((_, h)) = tpm.tpm2_create(scheme, curve) {
                        handles.push(h);
                    }
                }
                1 => {
                    if let Ok((_, h)) = tpm.tpm2_create_primary(scheme, curve) {
                        handles.push(h);
                    }
                }
                _ if handles.is_empty() || action == 2 => {
                    if let Ok((_, c)) = tpm.tpm2_ec_ephemeral() {
                        ctrs.push(c);
                    }
                }
                _ => {
                    let handle = handles[rng.next_u32() as usize % handles.len()];
                    let ctr = if ctrs.is_empty() || rng.next_u32() % 4 == 0 {
                        u64::from(rng.next_u32() % 300)
                    } else {
                        ctrs[rng.next_u32() as usize % ctrs.len()]
                    };
                    let peer_static = pick_point(&mut rng);
                    let peer_ephemeral = pick_point(&mut rng);
                    if action < 5 {
                        let _ = tpm.tpm2_zgen_2phase(scheme, handle, ctr, &peer_static, &peer_ephemeral);
                    } else {
                        let _ = tpm.tpm2_zgen_2phase_rev(
                            scheme,
                            handle,
                            ctr,
                            &peer_static,
                            &peer_ephemeral,
                            "alice",
                            "bob",
                            rng.next_u32() % 2 == 0,
                        );
                    }
                }
            }
        }
        assert!(tpm.witness_count() > 0, "scan must have secrets to look for");
        let findings = tpm.secrecy_scan();
        assert!(findings.is_empty(), "instance {instance} leaked: {findings:?}");
    }
    assert!(commands >= 10_000, "ran {commands} commands");
    println!("criterion 4 (TPM single-use, scheme binding, off-curve, secrecy scan): pass");
}

#[test]
fn c5_p256_entropy_measurements_hit_their_targets() {
    let start = Instant::now();
    let p256 = Group::p256();
    let reports = run_curve_report(
        &p256,
        &[FunctionTag::Avf, FunctionTag::ReferenceHash],
        DEFAULT_SAMPLES,
        1,
        DEFAULT_DEPTH,
    )
    .unwrap();
    let (avf, hash) = (&reports[0], &reports[1]);
    assert!((avf.nist_bits - 126.9).abs() <= 1.5, "avf estimate {}", avf.nist_bits);
    assert!((hash.nist_bits - 127.9).abs() <= 1.5, "hash estimate {}", hash.nist_bits);
    assert!(avf.ctw_ratio_percent >= 97.0, "avf ratio {}", avf.ctw_ratio_percent);
    assert!(hash.ctw_ratio_percent >= 97.0, "hash ratio {}", hash.ctw_ratio_percent);

    let sm2 = Group::by_name("sm2p256").unwrap();
    let prime =
        run_curve_report(&sm2, &[FunctionTag::AvfPrime], DEFAULT_SAMPLES, 1, DEFAULT_DEPTH)
            .unwrap();
    assert!(
        (prime[0].nist_bits - 125.8).abs() <= 1.5,
        "avf' estimate {}",
        prime[0].nist_bits
    );
    assert!(start.elapsed() < Duration::from_secs(300));
    println!(
        "criterion 5 (P-256 avf {:.4}, hash {:.4}, SM2 avf' {:.4}, ratios >= 97%): pass",
        avf.nist_bits, hash.nist_bits, prime[0].nist_bits
    );
}

#[test]
fn c6_estimators_detect_degenerate_and_pinned_input() {
    let constant =
        SampleSet::from_values("synthetic", FunctionTag::Avf, 8, &[0x5a; 4096], 0);
    assert_eq!(nist_min_entropy(&constant).unwrap(), 0.0);
    assert!(ctw_ratio(&constant, 10).unwrap() < 5.0);

    let mut rng = ChaCha20Rng::seed_from_u64(0xacce);
    let values: Vec<u64> = (0..8192).map(|_| u64::from(rng.next_u32())).collect();
    let set = SampleSet::from_values("synthetic", FunctionTag::Avf, 32, &values, 0);
    let base = nist_min_entropy(&set).unwrap();
    for k in [1usize, 4, 8] {
        let pinned = nist_min_entropy(&set.pin_lsbs(k)).unwrap();
        let drop = base - pinned;
        assert!((drop - k as f64).abs() <= 0.5, "pinning {k} bits dropped {drop}");
    }
    println!("criterion 6 (estimator sanity on constant and pinned input): pass");
}

#[test]
fn c7_response_checkers_accept_honest_and_reject_perturbed() {
    let group = Group::toy();
    let mut rng = ChaCha20Rng::seed_from_u64(0x0c7a);
    let mut rejected = 0usize;
    for trial in 0..250u64 {
        for scheme in [Scheme::Ecmqv, Scheme::Sm2] {
            let a = group.sample_scalar(&mut rng);
            let x = group.sample_scalar(&mut rng);
            let pa = group.exp_generator(&a).unwrap();
            let px = group.exp_generator(&x).unwrap();

            let mut tpm = TpmState::new(Group::toy(), TpmMode::Original, 5_000 + trial);
            let (pb, handle) = tpm.tpm2_create(scheme, "toy").unwrap();
            let (py, ctr) = tpm.tpm2_ec_ephemeral().unwrap();
            let z = tpm.tpm2_zgen_2phase(scheme, handle, ctr, &pa, &px).unwrap().z1;

            let check = match scheme {
                Scheme::Ecmqv => verify_mqv_functionality,
                _ => verify_sm2_functionality,
            };
            assert!(
                check(&group, &a, &x, &pb, &py, &z).unwrap(),
                "honest response rejected, {} trial {trial}",
                scheme.name()
            );

            let r = group.sample_scalar(&mut rng);
            let z_forged = group.mul(&z, &group.exp_generator(&r).unwrap()).unwrap();
            assert!(
                !check(&group, &a, &x, &pb, &py, &z_forged).unwrap(),
                "perturbed Z accepted, {} trial {trial}",
                scheme.name()
            );
            rejected += 1;

            loop {
                let s = group.sample_scalar(&mut rng);
                let y_forged = group.mul(&py, &group.exp_generator(&s).unwrap()).unwrap();
                if y_forged.is_identity() {
                    continue;
                }
                let honest_for_forged =
                    paired_shared_secret(&group, scheme, &a, &x, &px, &pb, &y_forged).unwrap();
                if honest_for_forged == z {
                    continue;
                }
                assert!(
                    !check(&group, &a, &x, &pb, &y_forged, &z).unwrap(),
                    "perturbed ephemeral accepted, {} trial {trial}",
                    scheme.name()
                );
                rejected += 1;
                break;
            }
        }
    }
    assert_eq!(rejected, 1_000);
    println!("criterion 7 (response checkers: honest accepted, 1000 perturbed rejected): pass");
}

#[test]
fn c8_seeded_runs_reproduce_identical_bytes() {
    for name in ["um-handshake", "mqv-handshake", "sm2-handshake"] {
        let scenario = builtin_scenario(name).unwrap();
        let first = run_scenario(&scenario).unwrap().env.transcript_jsonl();
        let second = run_scenario(&scenario).unwrap().env.transcript_jsonl();
        assert!(!first.is_empty());
        assert_eq!(first, second, "transcript drift in {name}");
    }

    assert_eq!(run_attack_matrix(7).to_json(), run_attack_matrix(7).to_json());

    let make_report = || {
        reports_to_json(&run_curve_report(&Group::toy(), &FunctionTag::ALL, 2048, 9, 8).unwrap())
    };
    assert_eq!(make_report(), make_report());

    let trace = |seed: u64| {
        let mut tpm = TpmState::new(Group::toy(), TpmMode::Revised, seed);
        let (_, handle) = tpm.tpm2_create(Scheme::Ecmqv, "toy").unwrap();
        let (_, ctr) = tpm.tpm2_ec_ephemeral().unwrap();
        let peers = Group::toy().sample_points(17, 2);
        let _ = tpm.tpm2_zgen_2phase_rev(
            Scheme::Ecmqv, handle, ctr, &peers[0], &peers[1], "alice", "bob", false,
        );
        tpm.trace_jsonl()
    };
    assert_eq!(trace(31), trace(31));
    println!("criterion 8 (byte-identical reruns for transcripts, matrices, reports): pass");
}
