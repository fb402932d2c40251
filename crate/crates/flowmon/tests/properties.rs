use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use flowmon::alias::compute_alias;
use flowmon::ast::ObjType;
use flowmon::frontend::{elaborate, parse};
use flowmon::harness::{generate_program, GenConfig};
use flowmon::instrument::emit;
use flowmon::interp::{collect_updates, exec, update, EvalContext, NoopObserver};
use flowmon::label::Label;
use flowmon::layout::label_decls;
use flowmon::model::{mem_equal, s_equivalent, LabelMemory};

proptest! {
    #[test]
    fn join_is_commutative_associative_idempotent(a: u64, b: u64, c: u64) {
        let (a, b, c) = (Label(a), Label(b), Label(c));
        prop_assert_eq!(a.join(b), b.join(a));
        prop_assert_eq!(a.join(b).join(c), a.join(b.join(c)));
        prop_assert_eq!(a.join(a), a);
        prop_assert_eq!(a.join(Label::BOTTOM), a);
    }

    #[test]
    fn leq_is_a_partial_order_characterized_by_join(a: u64, b: u64, c: u64) {
        let (a, b, c) = (Label(a), Label(b), Label(c));
        prop_assert!(a.leq(a));
        if a.leq(b) && b.leq(a) {
            prop_assert_eq!(a, b);
        }
        if a.leq(b) && b.leq(c) {
            prop_assert!(a.leq(c));
        }
        prop_assert_eq!(a.leq(b), a.join(b) == b);
        prop_assert!(a.leq(a.join(b)));
    }

    #[test]
    fn emitted_text_reparses_to_the_same_program(seed: u64) {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = generate_program(&cfg, &mut rng);
        let text = emit(&p);
        let q = elaborate(&parse(&text).unwrap()).unwrap();
        // positions differ (generated ASTs carry none), everything else
        // must survive the round trip
        prop_assert_eq!(p.body.strip_meta(), q.body.strip_meta());
        prop_assert_eq!(&p.env, &q.env);
        prop_assert_eq!(&p.var_types, &q.var_types);
        prop_assert_eq!(&p.initial_memory, &q.initial_memory);
        prop_assert_eq!(&p.initial_labels, &q.initial_labels);
        prop_assert_eq!(emit(&q), text);
    }

    #[test]
    fn update_joins_exactly_the_may_written_blocks(seed: u64, raise in 0u64..8, init in 0u64..8) {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = generate_program(&cfg, &mut rng);
        let alias = compute_alias(&p);
        let touched = collect_updates(&alias, &p.body);
        let g0 = LabelMemory::uniform(p.env.len(), Label(init));
        let mut g = g0.clone();
        update(&alias, &p.body, Label(raise), &mut g);
        for b in p.env.blocks() {
            if touched.contains(&b) {
                prop_assert_eq!(g.get(b), g0.get(b).join(Label(raise)));
            } else {
                prop_assert_eq!(g.get(b), g0.get(b));
            }
        }
    }

    #[test]
    fn final_labels_dominate_every_written_secret_source(seed: u64) {
        // conservativity against an independent oracle: if no block is
        // secret initially, no block can be secret at the end
        let cfg = GenConfig { secret_fraction: 0.0, ..GenConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = generate_program(&cfg, &mut rng);
        let alias = compute_alias(&p);
        let ctx = EvalContext { env: &p.env, alias: &alias, mutation: None };
        let mut m = p.initial_memory.clone();
        let mut g = p.initial_labels.clone();
        let mut fuel = cfg.fuel;
        if exec(&ctx, &p.body, Label::BOTTOM, &mut m, &mut g, &mut fuel, &mut NoopObserver).is_ok() {
            for b in p.env.blocks() {
                prop_assert_eq!(g.get(b), Label::BOTTOM);
            }
        }
    }

    #[test]
    fn s_equivalence_is_symmetric_and_total_at_top(seed: u64) {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = generate_program(&cfg, &mut rng);
        let q = generate_program(&cfg, &mut rng);
        let g = p.initial_labels.clone();
        let (m1, m2) = (&p.initial_memory, &p.initial_memory);
        prop_assert!(s_equivalent(&g, Label::BOTTOM, m1, m2));
        if p.env.len() == q.env.len() {
            let ma = &p.initial_memory;
            let mb = &q.initial_memory;
            prop_assert_eq!(
                s_equivalent(&g, Label::BOTTOM, ma, mb),
                s_equivalent(&g, Label::BOTTOM, mb, ma)
            );
            // with every block labeled above s, any two shapes are equivalent
            let high = LabelMemory::uniform(p.env.len(), Label(0b10));
            prop_assert!(s_equivalent(&high, Label(0b01), ma, mb));
            // at top, equivalence degenerates to plain per-block equality
            let all_equal = p
                .env
                .blocks()
                .all(|b| mem_equal(ma, mb, b).unwrap_or(false));
            prop_assert_eq!(s_equivalent(&g, Label(u64::MAX), ma, mb), all_equal);
        }
    }

    #[test]
    fn label_decl_names_are_distinct_and_prefixed(depth in 0usize..2, len in 1usize..12, arr: bool) {
        let mut t = ObjType::Int;
        for _ in 0..depth {
            t = ObjType::Ptr(Box::new(t));
        }
        if arr {
            t = ObjType::Array(Box::new(t), len);
        }
        let decls = label_decls("v", &t).unwrap();
        prop_assert!(!decls.is_empty());
        let names: Vec<&str> = decls.iter().map(|d| d.name.as_str()).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), names.len());
        for n in names {
            prop_assert!(n.starts_with("v_status"));
        }
    }
}
