//! Synthetic marketplace corpora with planted, controllable signal.
//!
//! Sale documents are written as listings that draw from a sale lexicon and
//! from one lexicon per category; non-sale documents are forum-style prose
//! that occasionally borrows the same vocabulary. Credential listings carry
//! Bitcoin addresses and e-mail contacts more often than the rest. Label
//! noise uses its own random stream, so changing `noise` leaves every text
//! byte-identical and only flips labels.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Document, LabelSet, Source};
use crate::error::{Error, Result};
use crate::rng::{self, Rng as SeededRng};

pub const SALE_LEXICON: &[&str] = &[
    "price",
    "shipping",
    "vendor",
    "escrow",
    "order",
    "stock",
    "discount",
    "wholesale",
    "delivery",
    "payment",
    "listing",
    "qty",
    "usd",
    "offer",
    "bulk",
    "refund",
    "tracking",
    "stealth",
    "reship",
    "sample",
    "deal",
    "moq",
    "checkout",
    "invoice",
];

pub const DRUG_LEXICON: &[&str] = &[
    "mdma",
    "cocaine",
    "heroin",
    "ketamine",
    "lsd",
    "xanax",
    "oxycodone",
    "cannabis",
    "meth",
    "pills",
    "gram",
    "fentanyl",
    "kush",
    "molly",
    "adderall",
    "opium",
    "psilocybin",
    "tabs",
    "benzos",
    "hash",
];

pub const WEAPON_LEXICON: &[&str] = &[
    "glock",
    "pistol",
    "rifle",
    "ammo",
    "ak47",
    "handgun",
    "shotgun",
    "silencer",
    "caliber",
    "firearm",
    "magazine",
    "9mm",
    "revolver",
    "suppressor",
    "holster",
    "barrel",
    "ar15",
    "rounds",
    "scope",
    "beretta",
];

pub const CREDENTIAL_LEXICON: &[&str] = &[
    "fullz",
    "cvv",
    "login",
    "password",
    "dumps",
    "accounts",
    "paypal",
    "netflix",
    "combo",
    "bank",
    "ssn",
    "credentials",
    "logs",
    "cookies",
    "spotify",
    "rdp",
    "smtp",
    "checker",
    "valid",
    "hacked",
];

const BACKGROUND: &[&str] = &[
    "the",
    "forum",
    "thread",
    "post",
    "news",
    "people",
    "think",
    "today",
    "question",
    "help",
    "anyone",
    "know",
    "about",
    "security",
    "privacy",
    "tor",
    "update",
    "market",
    "review",
    "opinion",
    "discussion",
    "police",
    "arrested",
    "article",
    "report",
    "server",
    "link",
    "mirror",
    "guide",
    "tutorial",
    "community",
    "rules",
    "welcome",
    "members",
    "life",
    "music",
    "game",
    "world",
    "time",
    "year",
    "and",
    "with",
    "from",
    "this",
    "that",
    "have",
    "will",
    "just",
    "like",
    "good",
    "new",
    "back",
    "after",
    "first",
    "also",
    "more",
    "some",
    "what",
    "when",
    "there",
    "their",
    "would",
    "could",
    "should",
    "really",
    "because",
    "thanks",
    "please",
    "read",
    "write",
    "story",
    "network",
    "browser",
    "software",
    "phone",
    "email",
    "channel",
    "group",
    "admin",
    "moderator",
    "account",
    "scam",
    "warning",
    "trust",
    "safe",
];

const BASE58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
const ONION: &[u8] = b"abcdefghijklmnopqrstuvwxyz234567";

/// How the labeled subset's class balance is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSampling {
    /// Exactly `round(sale_rate * n_labeled)` sale documents.
    Stratified,
    /// Each labeled document is a sale independently with probability `sale_rate`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    /// Probability of flipping the observed sale label of a labeled document.
    pub noise: f64,
    pub sale_rate: f64,
    /// Independent probability of each category for a sale document.
    pub category_rate: f64,
    /// Strength of the planted lexicon signal in (0, 1].
    pub signal_rate: f64,
    /// How often non-sale text borrows sale or category vocabulary.
    pub confusion_rate: f64,
    pub sampling: LabelSampling,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_labeled: 300,
            n_unlabeled: 2000,
            noise: 0.05,
            // 826 / 1575 sale documents in the reference labeled set
            sale_rate: 0.524,
            category_rate: 0.45,
            signal_rate: 0.5,
            confusion_rate: 0.3,
            sampling: LabelSampling::Stratified,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_labeled == 0 || self.n_unlabeled == 0 {
            return Err(Error::Config(
                "synthetic corpus counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!(
                "noise rate must lie in [0, 1), got {}",
                self.noise
            )));
        }
        for (name, v) in [
            ("sale_rate", self.sale_rate),
            ("category_rate", self.category_rate),
            ("confusion_rate", self.confusion_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.signal_rate > 0.0 && self.signal_rate <= 1.0) {
            return Err(Error::Config(format!(
                "signal_rate must lie in (0, 1], got {}",
                self.signal_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub labeled: Vec<Document>,
    pub unlabeled: Vec<Document>,
    /// Generating labels of the unlabeled documents, for diagnostics only.
    pub unlabeled_truth: Vec<LabelSet>,
    /// Labeled ids whose observed sale label was flipped by noise.
    pub flipped: Vec<String>,
}

impl SyntheticCorpus {
    pub fn all_documents(&self) -> Vec<Document> {
        self.labeled
            .iter()
            .chain(&self.unlabeled)
            .cloned()
            .collect()
    }
}

// Source mix of the reference corpus.
const LABELED_SOURCES: [u32; 4] = [450, 825, 200, 100];
const UNLABELED_SOURCES: [u32; 4] = [4382, 13107, 1899, 612];

fn pick_source(rng: &mut SeededRng, weights: &[u32; 4]) -> Source {
    let total: u32 = weights.iter().sum();
    let mut r = rng.gen_range(0..total);
    for (src, w) in Source::ALL.iter().zip(weights) {
        if r < *w {
            return *src;
        }
        r -= w;
    }
    Source::Pastebin
}

fn pick<'a>(rng: &mut SeededRng, words: &'a [&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn binomial(rng: &mut SeededRng, n: u32, p: f64) -> u32 {
    (0..n).filter(|_| rng.gen_bool(p)).count() as u32
}

fn random_string(rng: &mut SeededRng, alphabet: &[u8], len: usize) -> String {
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect()
}

fn bitcoin_address(rng: &mut SeededRng) -> String {
    let len = rng.gen_range(25..=33);
    format!("1{}", random_string(rng, BASE58, len))
}

fn email(rng: &mut SeededRng) -> String {
    let len = rng.gen_range(4..10);
    let user = random_string(rng, b"abcdefghijklmnopqrstuvwxyz0123456789", len);
    let host = pick(
        rng,
        &["protonmail.com", "tutanota.de", "cock.li", "mail.ru"],
    );
    format!("{user}@{host}")
}

fn url(rng: &mut SeededRng) -> String {
    let host = random_string(rng, ONION, 16);
    let len = rng.gen_range(3..8);
    let path = random_string(rng, b"abcdefghijklmnopqrstuvwxyz", len);
    if rng.gen_bool(0.5) {
        format!("http://{host}.onion/{path}")
    } else {
        format!("{host}.onion/{path}")
    }
}

fn ip_address(rng: &mut SeededRng) -> String {
    format!(
        "{}.{}.{}.{}",
        rng.gen_range(1..=223),
        rng.gen_range(0..=255),
        rng.gen_range(0..=255),
        rng.gen_range(1..=254)
    )
}

fn luhn_card(rng: &mut SeededRng) -> String {
    let mut digits: Vec<u32> = std::iter::once(4)
        .chain((0..14).map(|_| rng.gen_range(0..10)))
        .collect();
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 0 {
                let dd = d * 2;
                if dd > 9 {
                    dd - 9
                } else {
                    dd
                }
            } else {
                d
            }
        })
        .sum();
    digits.push((10 - sum % 10) % 10);
    let s: String = digits
        .iter()
        .map(|d| char::from_digit(*d, 10).unwrap())
        .collect();
    format!("{} {} {} {}", &s[0..4], &s[4..8], &s[8..12], &s[12..16])
}

fn timestamp(rng: &mut SeededRng) -> DateTime<Utc> {
    let start = Utc.with_ymd_and_hms(2021, 9, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(2023, 9, 30, 23, 59, 59).unwrap();
    let span = (end - start).num_seconds();
    start + Duration::seconds(rng.gen_range(0..=span))
}

fn category_lexicon(index: usize) -> &'static [&'static str] {
    match index {
        0 => DRUG_LEXICON,
        1 => WEAPON_LEXICON,
        _ => CREDENTIAL_LEXICON,
    }
}

fn prose_line(rng: &mut SeededRng, extra: &mut Vec<String>) -> String {
    let n = rng.gen_range(6..16);
    let mut words: Vec<String> = (0..n).map(|_| pick(rng, BACKGROUND).to_string()).collect();
    let take = extra.len().min(rng.gen_range(0..=2));
    for w in extra.drain(..take) {
        let pos = rng.gen_range(0..=words.len());
        words.insert(pos, w);
    }
    words.join(" ")
}

fn sale_text(rng: &mut SeededRng, labels: &LabelSet, spec: &SyntheticSpec) -> String {
    let mut planted: Vec<String> = Vec::new();
    let n_sale = 1 + binomial(rng, 4, spec.signal_rate);
    planted.extend((0..n_sale).map(|_| pick(rng, SALE_LEXICON).to_string()));
    for (i, present) in [labels.drug, labels.weapon, labels.credential]
        .into_iter()
        .enumerate()
    {
        let lex = category_lexicon(i);
        if present {
            let n = 1 + binomial(rng, 3, spec.signal_rate);
            planted.extend((0..n).map(|_| pick(rng, lex).to_string()));
        } else if rng.gen_bool(spec.confusion_rate * 0.3) {
            planted.push(pick(rng, lex).to_string());
        }
    }
    planted.shuffle(rng);

    let listing = rng.gen_bool(0.7);
    let mut lines = Vec::new();
    let title_words = planted.len().min(2);
    let title: Vec<String> = planted.drain(..title_words).collect();
    lines.push(format!("{} {}", title.join(" "), pick(rng, BACKGROUND)));
    if listing {
        lines.push(String::new());
        for w in planted.drain(..) {
            let qty = rng.gen_range(1..100);
            let price = rng.gen_range(5..900);
            let indent = if rng.gen_bool(0.5) { "  " } else { "    " };
            lines.push(format!("{indent}- {w} x{qty} ${price}"));
        }
    } else {
        let n_lines = rng.gen_range(1..4);
        for _ in 0..n_lines {
            lines.push(prose_line(rng, &mut planted));
        }
        if !planted.is_empty() {
            lines.push(planted.join(" "));
        }
    }

    let btc_rate = if labels.credential { 0.8 } else { 0.35 };
    if rng.gen_bool(btc_rate) {
        lines.push(format!("btc: {}", bitcoin_address(rng)));
    }
    if rng.gen_bool(if labels.credential { 0.5 } else { 0.25 }) {
        lines.push(format!("contact {}", email(rng)));
    }
    if rng.gen_bool(0.3) {
        lines.push(format!("shop {}", url(rng)));
    }
    if labels.credential && rng.gen_bool(0.3) {
        lines.push(format!("  sample card {}", luhn_card(rng)));
    }
    if labels.credential && rng.gen_bool(0.2) {
        lines.push(format!("  rdp {}", ip_address(rng)));
    }
    if rng.gen_bool(0.2) {
        lines.push(format!("pics: item{}.jpg", rng.gen_range(1..50)));
    }
    lines.join("\n")
}

fn prose_text(rng: &mut SeededRng, spec: &SyntheticSpec) -> String {
    let mut borrowed: Vec<String> = Vec::new();
    let n_sale = binomial(rng, 2, spec.confusion_rate);
    borrowed.extend((0..n_sale).map(|_| pick(rng, SALE_LEXICON).to_string()));
    if rng.gen_bool(spec.confusion_rate) {
        let lex = category_lexicon(rng.gen_range(0..3));
        let n = rng.gen_range(1..=2);
        borrowed.extend((0..n).map(|_| pick(rng, lex).to_string()));
    }
    borrowed.shuffle(rng);

    let mut lines = Vec::new();
    let n_par = rng.gen_range(1..4);
    for p in 0..n_par {
        if p > 0 {
            lines.push(String::new());
        }
        for _ in 0..rng.gen_range(1..4) {
            lines.push(prose_line(rng, &mut borrowed));
        }
    }
    if !borrowed.is_empty() {
        lines.push(borrowed.join(" "));
    }
    if rng.gen_bool(0.3) {
        lines.push(format!("  > quoted from {}", pick(rng, BACKGROUND)));
    }
    if rng.gen_bool(0.2) {
        lines.push(format!("mirror {}", url(rng)));
    }
    if rng.gen_bool(0.1) {
        lines.push(format!("donate {}", bitcoin_address(rng)));
    }
    if rng.gen_bool(0.1) {
        lines.push(format!("mail me {}", email(rng)));
    }
    if rng.gen_bool(0.05) {
        lines.push(format!("node at {}", ip_address(rng)));
    }
    lines.join("\n")
}

fn true_labels(rng: &mut SeededRng, sale: bool, spec: &SyntheticSpec) -> LabelSet {
    if !sale {
        return LabelSet::none();
    }
    LabelSet {
        sale: true,
        drug: rng.gen_bool(spec.category_rate),
        weapon: rng.gen_bool(spec.category_rate),
        credential: rng.gen_bool(spec.category_rate),
    }
}

fn document(
    rng: &mut SeededRng,
    id: String,
    labels: &LabelSet,
    sources: &[u32; 4],
    spec: &SyntheticSpec,
) -> Document {
    let source = pick_source(rng, sources);
    let timestamp = timestamp(rng);
    let raw_text = if labels.sale {
        sale_text(rng, labels, spec)
    } else {
        prose_text(rng, spec)
    };
    Document {
        id,
        source,
        timestamp,
        raw_text,
        labels: None,
    }
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = rng::seeded(rng::derive(seed, 0));
    let mut noise_rng = rng::seeded(rng::derive(seed, 1));

    let sale_flags: Vec<bool> = match spec.sampling {
        LabelSampling::Stratified => {
            let n_sale = (spec.sale_rate * spec.n_labeled as f64).round() as usize;
            let mut flags: Vec<bool> = (0..spec.n_labeled).map(|i| i < n_sale).collect();
            flags.shuffle(&mut rng);
            flags
        }
        LabelSampling::Uniform => (0..spec.n_labeled)
            .map(|_| rng.gen_bool(spec.sale_rate))
            .collect(),
    };

    let mut labeled = Vec::with_capacity(spec.n_labeled);
    let mut flipped = Vec::new();
    for (i, sale) in sale_flags.into_iter().enumerate() {
        let truth = true_labels(&mut rng, sale, spec);
        let mut doc = document(&mut rng, format!("l{i:06}"), &truth, &LABELED_SOURCES, spec);
        let mut observed = truth;
        if spec.noise > 0.0 && noise_rng.gen_bool(spec.noise) {
            observed = if truth.sale {
                LabelSet::none()
            } else {
                LabelSet {
                    sale: true,
                    ..LabelSet::none()
                }
            };
            flipped.push(doc.id.clone());
        }
        doc.labels = Some(observed);
        labeled.push(doc);
    }

    let mut unlabeled = Vec::with_capacity(spec.n_unlabeled);
    let mut unlabeled_truth = Vec::with_capacity(spec.n_unlabeled);
    for i in 0..spec.n_unlabeled {
        let sale = rng.gen_bool(spec.sale_rate);
        let truth = true_labels(&mut rng, sale, spec);
        unlabeled.push(document(
            &mut rng,
            format!("u{i:06}"),
            &truth,
            &UNLABELED_SOURCES,
            spec,
        ));
        unlabeled_truth.push(truth);
    }

    Ok(SyntheticCorpus {
        labeled,
        unlabeled,
        unlabeled_truth,
        flipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_to_jsonl;

    fn small(noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_labeled: 100,
            n_unlabeled: 500,
            noise,
            ..SyntheticSpec::default()
        }
    }

    fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }

    #[test]
    fn byte_identical_per_seed() {
        let a = generate_synthetic_corpus(&small(0.0), 7).unwrap();
        let b = generate_synthetic_corpus(&small(0.0), 7).unwrap();
        assert_eq!(
            corpus_to_jsonl(&a.all_documents()),
            corpus_to_jsonl(&b.all_documents())
        );
        let c = generate_synthetic_corpus(&small(0.0), 8).unwrap();
        assert_ne!(corpus_to_jsonl(&a.labeled), corpus_to_jsonl(&c.labeled));
    }

    #[test]
    fn planted_category_tokens() {
        let corpus = generate_synthetic_corpus(&small(0.0), 7).unwrap();
        let mut checked = 0;
        for doc in &corpus.labeled {
            let labels = doc.labels.unwrap();
            let toks = tokens(&doc.raw_text);
            for (present, lex) in [
                (labels.drug, DRUG_LEXICON),
                (labels.weapon, WEAPON_LEXICON),
                (labels.credential, CREDENTIAL_LEXICON),
            ] {
                if present {
                    assert!(
                        toks.iter().any(|t| lex.contains(&t.as_str())),
                        "{}",
                        doc.raw_text
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn labels_are_consistent() {
        let corpus = generate_synthetic_corpus(&small(0.2), 3).unwrap();
        assert!(corpus
            .labeled
            .iter()
            .all(|d| d.labels.unwrap().is_consistent()));
        assert!(corpus.unlabeled.iter().all(|d| d.labels.is_none()));
    }

    #[test]
    fn stratified_sale_count_is_exact() {
        let corpus = generate_synthetic_corpus(&small(0.0), 11).unwrap();
        let sales = corpus
            .labeled
            .iter()
            .filter(|d| d.labels.unwrap().sale)
            .count();
        assert_eq!(sales, (0.524f64 * 100.0).round() as usize);
    }

    #[test]
    fn noise_only_touches_labels() {
        let clean = generate_synthetic_corpus(&small(0.0), 5).unwrap();
        let noisy = generate_synthetic_corpus(&small(0.3), 5).unwrap();
        assert!(!noisy.flipped.is_empty());
        for (c, n) in clean.labeled.iter().zip(&noisy.labeled) {
            assert_eq!(c.raw_text, n.raw_text);
            let changed = c.labels.unwrap().sale != n.labels.unwrap().sale;
            assert_eq!(changed, noisy.flipped.contains(&n.id));
        }
    }

    #[test]
    fn zero_counts_rejected() {
        let spec = SyntheticSpec {
            n_labeled: 0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(
            generate_synthetic_corpus(&spec, 1),
            Err(Error::Config(_))
        ));
    }
}
