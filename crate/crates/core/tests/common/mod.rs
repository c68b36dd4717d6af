#![allow(dead_code)]

use std::collections::BTreeMap;

use dialtrack::corpus::synth::{generate_synthetic, SynthConfig, SyntheticData};
use dialtrack::corpus::{build_vocab, concat, UtteranceSeq};
use dialtrack::doc2vec::train_pvdm;
use dialtrack::tfidf::{assign_targets, TfIdfVariant};
use dialtrack::{PvdmConfig, TargetAssignment, TfIdfIndex, TopicEmbeddingSpace, Vocabulary};

pub struct Fixture {
    pub data: SyntheticData,
    pub vocab: Vocabulary,
    pub seq: UtteranceSeq,
    pub index: TfIdfIndex,
    pub space: TopicEmbeddingSpace,
    pub targets: TargetAssignment,
    pub latent: TargetAssignment,
    pub domains: Vec<String>,
}

pub fn small_synth() -> SynthConfig {
    SynthConfig {
        domains: SynthConfig::uniform_domains(3),
        articles: 5,
        sessions: 2,
        utterances_per_session: 20,
        ..SynthConfig::default()
    }
}

pub fn fixture(cfg: &SynthConfig, seed: u64, dim: usize) -> Fixture {
    let data = generate_synthetic(cfg, seed).unwrap();
    let vocab = build_vocab(&data.dialogues, 1).unwrap();
    let seq = concat(&data.dialogues, false, 1);
    let index = TfIdfIndex::build(&data.articles, TfIdfVariant::default()).unwrap();
    let pvdm = PvdmConfig {
        dim,
        epochs: 30,
        seed,
        ..PvdmConfig::default()
    };
    let space = train_pvdm(&data.articles, &pvdm).unwrap();
    let targets = assign_targets(&index, &space, &seq, 1).unwrap();
    let gold: BTreeMap<usize, String> = data.topics.iter().cloned().enumerate().collect();
    let latent = TargetAssignment::from_articles(&space, &gold).unwrap();
    let domains = data.dialogues.domain_set.clone();
    Fixture {
        data,
        vocab,
        seq,
        index,
        space,
        targets,
        latent,
        domains,
    }
}
