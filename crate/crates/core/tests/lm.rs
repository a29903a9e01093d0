use botprof::lm_embed::{lm_nll, lm_train, perplexity, BiLm, LmConfig, Vocab, BOS, EOS};
use botprof::numnet::{LstmCell, Params};
use botprof::Parallelism;

/// Ten 20-token sentences over 40 words. A model that memorizes the set pays only
/// for the first choice in each direction, so the perplexity floor is 10^(1/20).
fn toy_sentences() -> Vec<Vec<String>> {
    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    (0..10)
        .map(|s| (0..20).map(|k| words[(s * 7 + k * (s % 3 + 1)) % 40].clone()).collect())
        .collect()
}

fn toy_config(seed: u64) -> LmConfig {
    LmConfig {
        embedding_dim: 24,
        hidden: 24,
        layers: 2,
        epochs: 200,
        lr: 0.03,
        batch: 10,
        min_freq: 1,
        clip: 5.0,
        lr_final_fraction: 0.1,
        seed,
    }
}

#[test]
fn toy_corpus_is_memorized_with_a_monotone_curve() {
    let sents = toy_sentences();
    let vocab = Vocab::from_sequences(&sents, 1).unwrap();
    let ids: Vec<Vec<usize>> = sents.iter().map(|s| vocab.encode(s)).collect();
    let (lm, log) = lm_train(vocab.len(), &ids, &toy_config(7), Parallelism::Parallel).unwrap();
    let ppl = perplexity(&lm, &ids, Parallelism::Parallel).unwrap();
    assert!(ppl < 1.3, "perplexity {ppl}");
    assert!(ppl >= 1.0);
    let rises = log.epoch_nll.windows(2).skip(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 2, "{rises} epoch-over-epoch increases");
}

#[test]
fn same_seed_same_parameters() {
    let sents = toy_sentences();
    let vocab = Vocab::from_sequences(&sents, 1).unwrap();
    let ids: Vec<Vec<usize>> = sents.iter().map(|s| vocab.encode(s)).collect();
    let cfg = LmConfig {
        epochs: 3,
        ..toy_config(3)
    };
    let (a, _) = lm_train(vocab.len(), &ids, &cfg, Parallelism::Parallel).unwrap();
    let (b, _) = lm_train(vocab.len(), &ids, &cfg, Parallelism::Sequential).unwrap();
    let bits = |m: &BiLm| m.params().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

// Independent reference: plain loops over the stored weights, one layer.
fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn ref_step(cell: &LstmCell, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let pre = |row: usize| {
        let mut z = cell.b.data()[row];
        for (k, xv) in x.iter().enumerate() {
            z += cell.w_x.row(row)[k] * xv;
        }
        for (k, hv) in h.iter().enumerate() {
            z += cell.w_h.row(row)[k] * hv;
        }
        z
    };
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for j in 0..n {
        let i = sig(pre(j));
        let f = sig(pre(n + j));
        let g = pre(2 * n + j).tanh();
        let o = sig(pre(3 * n + j));
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

fn ref_prob(lm: &BiLm, h: &[f64], target: usize) -> f64 {
    let logits: Vec<f64> = (0..lm.vocab_size())
        .map(|v| lm.proj_b.data()[v] + lm.proj.row(v).iter().zip(h).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    logits[target].exp() / z
}

fn ref_chain(lm: &BiLm, cell: &LstmCell, start: usize, seq: &[usize]) -> f64 {
    // Probability of `seq` read left to right after `start`.
    let n = lm.hidden();
    let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
    let mut p = 1.0;
    let mut input = start;
    for &tok in seq {
        let (h2, c2) = ref_step(cell, lm.emb.row(input), &h, &c);
        h = h2;
        c = c2;
        p *= ref_prob(lm, &h, tok);
        input = tok;
    }
    p
}

#[test]
fn two_token_joint_nll_matches_brute_force() {
    let cfg = LmConfig {
        embedding_dim: 2,
        hidden: 2,
        layers: 1,
        seed: 17,
        ..LmConfig::default()
    };
    // Reserved symbols plus two words: 6 outputs.
    let lm = BiLm::init(6, &cfg).unwrap();
    for (x1, x2) in [(4, 5), (5, 4), (4, 4), (1, 5)] {
        let fwd = ref_chain(&lm, &lm.fwd[0], BOS, &[x1, x2]);
        let bwd = ref_chain(&lm, &lm.bwd[0], EOS, &[x2, x1]);
        let parts = lm_nll(&lm, &[x1, x2]).unwrap();
        assert!((parts.forward + fwd.ln()).abs() < 1e-12);
        assert!((parts.backward + bwd.ln()).abs() < 1e-12);
        assert!((parts.joint + (fwd * bwd).ln()).abs() < 1e-12);
    }
}
