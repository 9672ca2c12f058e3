use halting_core::analyzer::{analyze, check_certificate, Certificate, CheckContext, Mode, Query};
use halting_core::asm::parse_program;
use halting_core::decider::{decide, derivation_report, Verdict3};
use halting_core::fixpoint::{build_gallery, construct_fixpoint, template_family, verify_fixpoint, DiagonalGallery};
use halting_core::lang::{decode, Arity, Instruction, Reg};
use halting_core::machine::{emulate, emulate_with, run_program, Context};
use num_bigint::BigUint;

fn gallery() -> DiagonalGallery {
    build_gallery(Mode::StrictAppendixB)
}

fn zero() -> Option<BigUint> {
    Some(BigUint::from(0u8))
}

#[test]
fn gallery_shapes() {
    let g = gallery();
    assert_eq!(decode(&g.k).instrs(), &[Instruction::Analyze(Reg::R1, Reg::R1), Instruction::Halt]);
    assert_eq!(decode(&g.p).instrs(), &[Instruction::HCall(Reg::R1, Reg::R1), Instruction::Halt]);
    assert_eq!(decode(&g.s), g.c_s.program);
    assert_eq!(decode(&g.q), g.c_q.program);
    let b = decode(&g.b);
    assert_eq!(b.arity(), Arity::One);
    assert_eq!(b.instrs()[0], Instruction::Const(Reg::R2, g.s.0.clone()));
    assert_eq!(b.instrs()[1], Instruction::Apply(Reg::R2, Reg::R1));
}

#[test]
fn diagonal_programs_diverge_under_emulation() {
    let g = gallery();
    assert!(!emulate(&g.s, None, 10_000).is_halted());
    let ctx = Context::new(Mode::StrictAppendixB, Some(g.designated()));
    assert!(!emulate_with(&ctx, &g.s, zero().as_ref(), 100_000).is_halted());
    assert!(!emulate_with(&ctx, &g.k, Some(&g.s.0), 100_000).is_halted());
}

#[test]
fn headline_verdicts() {
    let g = gallery();
    let d = g.designated();
    let strict = Mode::StrictAppendixB;
    let ks = Query::new(g.k.clone(), Some(g.s.0.clone()));
    let v = decide(&ks, strict, 100_000, Some(&d));
    let c = v.certificate().expect("(k, s) is certified");
    assert!(matches!(c, Certificate::AnalyzerSelfDivergence { .. }));
    assert!(check_certificate(c, &ks, &CheckContext::new(strict, Some(d.clone()))));

    for fuel in [1_000, 10_000, 100_000] {
        for q in [
            Query::new(g.s.clone(), zero()),
            Query::new(g.s.clone(), Some(g.s.0.clone())),
            Query::new(g.q.clone(), zero()),
        ] {
            assert!(matches!(decide(&q, strict, fuel, Some(&d)), Verdict3::Unknown { .. }), "{q} at {fuel}");
        }
    }
    let pq = Query::new(g.p.clone(), Some(g.q.0.clone()));
    assert!(matches!(decide(&pq, strict, 100_000, Some(&d)), Verdict3::NotHalts { .. }));

    let bs = Query::new(g.b.clone(), Some(g.s.0.clone()));
    let v = decide(&bs, Mode::General, 100_000, Some(&d));
    let c = v.certificate().expect("(b, s) is certified in general mode");
    assert!(check_certificate(c, &bs, &CheckContext::new(Mode::General, Some(d))));
}

#[test]
fn strict_mode_gives_up_at_once_on_designated_indices() {
    let g = gallery();
    let d = g.designated();
    let r = analyze(&Query::new(g.s.clone(), zero()), Mode::StrictAppendixB, 1_000, Some(&d));
    assert!(r.outcome.is_gave_up());
    assert_eq!(r.ticks, 1);
}

#[test]
fn derivation_has_four_steps_with_the_second_discharged() {
    let g = gallery();
    let r = derivation_report(&g.designated(), Some(&g.b), Mode::StrictAppendixB, 100_000);
    assert_eq!(r.steps.len(), 4);
    assert!(r.steps[1].assumption && r.steps[1].discharged);
    assert!(r.steps[2].justification.contains("Recursion-Theorem"));
    assert!(r.steps.iter().all(|s| s.holds == Some(true)), "{r:#?}");
}

#[test]
fn fixpoint_family_verifies() {
    let ctx = Context::default();
    for (name, t) in template_family() {
        let r = construct_fixpoint(&t).unwrap();
        assert!(verify_fixpoint(&r, 1_000_000), "{name}");
        let out = run_program(&ctx, &r.program, None, 1_000_000);
        let expect = run_program(&ctx, &t, Some(&r.index.0), 1_000_000);
        assert_eq!(out.output(), expect.output(), "{name}");
        if name == "identity" {
            assert_eq!(out.output(), Some(&r.index.0));
        }
        if name == "successor" {
            assert_eq!(out.output(), Some(&(r.index.0.clone() + 1u8)));
        }
    }
}

#[test]
fn diverging_fixpoints_match_in_lockstep() {
    let t = parse_program(";; arity 1\nINC r1\nJMP -1\n").unwrap();
    let r = construct_fixpoint(&t).unwrap();
    assert!(verify_fixpoint(&r, 200_000));
    // a template that loops differently from its fixpoint's body
    let mut broken = r.clone();
    broken.template = parse_program(";; arity 1\nINC r2\nJMP -1\n").unwrap();
    assert!(!verify_fixpoint(&broken, 200_000));
}

#[test]
fn gallery_is_deterministic() {
    let (a, b) = (gallery(), gallery());
    assert_eq!((a.k, a.s, a.p, a.q, a.b), (b.k, b.s, b.p, b.q, b.b));
}
