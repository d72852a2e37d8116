mod common;

use common::*;
use piecon::model::{Activation, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (i, variant) in [Variant::Piecon, Variant::PolyOnly, Variant::FreeEigenvalues].iter().cycle().take(30).enumerate() {
        let act = if i % 2 == 0 { Activation::Relu } else { Activation::Identity };
        let n = 4 + i % 12;
        let inst = random_instance(&mut rng, n, *variant, act);
        let fast = inst.model.forward::<ChaCha8Rng>(&inst.bank, &inst.x, None).unwrap().logits;
        let slow = naive_logits(&inst);
        let err = max_abs_diff(&fast, &slow);
        assert!(err <= 1e-6, "{variant:?} n={n}: {err}");
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 15 {
        let variant = [Variant::Piecon, Variant::PolyOnly, Variant::FreeEigenvalues][checked % 3];
        let mut inst = random_instance(&mut rng, 6 + checked % 6, variant, Activation::Relu);
        if kink_margin(&inst) < 1e-3 {
            continue;
        }
        let (name, err) = gradient_check(&mut inst, 1e-5);
        assert!(err <= 1e-4, "{variant:?}: tensor {name} relative error {err}");
        checked += 1;
    }
}
