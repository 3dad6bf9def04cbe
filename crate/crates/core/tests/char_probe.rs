//! TEMPORARY probe: char-seq2seq memorization diagnostics.

mod common;

use common::{memorization_config, memorization_corpus};
use docqa::models::{build_model, Architecture};
use docqa::train::{train, HyperParams, TrainSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
#[ignore]
fn probe_char() {
    let corpus = memorization_corpus(50, 7);
    println!("sample doc: {:?}", corpus[0].document);
    println!("sample answer: {:?}", corpus[0].answers);
    for (lr, hidden, steps) in [(0.002, 64, 800), (0.01, 64, 800), (0.02, 64, 800), (0.01, 96, 800)] {
        let mut config = memorization_config(Architecture::CharSeq2Seq);
        config.hidden = hidden;
        let start = std::time::Instant::now();
        let mut model = build_model(&config, &corpus, 11).unwrap();
        let hp = HyperParams::new(lr, 5.0);
        let schedule = TrainSchedule {
            max_steps: steps,
            batch_size: 16,
            eval_every: 100,
            patience: usize::MAX,
            target_f1: Some(0.95),
            seed: 3,
        };
        let result = train(model.as_mut(), &corpus, &corpus, &hp, &schedule).unwrap();
        print!("lr={lr} hidden={hidden}: ");
        for c in &result.curve {
            print!("({},{:.3},f1={:.2}) ", c.step, c.train_loss, c.validation_f1);
        }
        println!("elapsed={:.1?}", start.elapsed());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for inst in corpus.iter().take(3) {
            let p = model.predict(inst, &mut rng).unwrap();
            println!("  gold={:?} pred={:?}", inst.answers[0], p.answer);
        }
    }
}
