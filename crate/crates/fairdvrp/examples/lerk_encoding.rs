//! Leader-based random-keys encoding: how genomes decode into per-provider
//! target sequences, and how crossover and the leader repair behave.
//!
//! ```bash
//! cargo run --example lerk_encoding
//! ```

use std::sync::Arc;

use fairdvrp::encoding::{crossover, Chromosome, ElementSet};
use fairdvrp::world::{ProviderId, RequestId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let elements = Arc::new(ElementSet::new(
        vec![ProviderId(0), ProviderId(1)],
        (0..5).map(RequestId).collect(),
    )?);
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mother = Chromosome::random(Arc::clone(&elements), &mut rng);
    println!("mother genome (sorted by key):\n{}", mother.dump());
    println!("decodes to {:?}\n", mother.decode().assignments);

    let father = Chromosome::random(Arc::clone(&elements), &mut rng);
    println!("father decodes to {:?}\n", father.decode().assignments);

    let child = crossover(&mother, &father, &mut rng);
    println!("single-point crossover child:\n{}", child.dump());
    println!("child decodes to {:?}\n", child.decode().assignments);

    // The leader repair keeps the first sorted element a provider even if a
    // request key undercuts every provider key.
    let mut skewed = Chromosome::from_keys(
        Arc::clone(&elements),
        vec![0.8, 0.9, 0.01, 0.4, 0.5, 0.6, 0.7],
    );
    skewed.enforce_leader();
    println!("after leader repair:\n{}", skewed.dump());
    Ok(())
}
