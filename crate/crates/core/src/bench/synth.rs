//! Synthetic movie-domain benchmark in the style of MetaQA: a small KB over
//! eight relations, templated 1/2/3-hop questions whose gold answers come from
//! executing the template's chain, proxy texts for the relations, and
//! paraphrased fact sentences for restoring dropped facts as text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{serialize_documents, serialize_qa, QaExample};
use crate::casebase::InferentialChain;
use crate::error::{Error, Result};
use crate::kg::{Document, KnowledgeGraph, Mention};
use crate::realign::ProxyTextTable;
use crate::rng::StableRng;

pub const RELATIONS: [&str; 8] = [
    "directed_by",
    "written_by",
    "starred_actors",
    "release_year",
    "in_language",
    "has_tags",
    "has_genre",
    "has_imdb_rating",
];

pub const PROXY_TEXTS: [(&str, &str); 8] = [
    ("directed_by", "<SUBJ> is a film directed by <OBJ>, its director"),
    ("written_by", "<SUBJ> is a film written by <OBJ>, who wrote the screenplay as its writer"),
    ("starred_actors", "<SUBJ> is a film starring <OBJ>, who starred in its cast as an actor"),
    ("release_year", "<SUBJ> is a film released in the year <OBJ>, its release year"),
    ("in_language", "<SUBJ> is a film in the <OBJ> language, its spoken language"),
    ("has_tags", "<SUBJ> is a film tagged with <OBJ>, a keyword that describes it"),
    ("has_genre", "<SUBJ> is a film of the <OBJ> genre, its category"),
    ("has_imdb_rating", "<SUBJ> is a film rated <OBJ> on imdb, its rating"),
];

/// Two paraphrases per relation, worded differently from the proxy texts.
/// `{s}` is the film, `{o}` the value.
const FACT_SENTENCES: [(&str, [&str; 2]); 8] = [
    ("directed_by", ["{o} directed {s}", "{s} was made by director {o}"]),
    ("written_by", ["{o} wrote the script of {s}", "the screenplay for {s} came from {o}"]),
    ("starred_actors", ["{o} starred in {s}", "{s} featured {o} in the cast"]),
    ("release_year", ["{s} was released in {o}", "{s} had its release in {o}"]),
    ("in_language", ["{s} is spoken in {o}", "{s} was filmed in the {o} language"]),
    ("has_tags", ["{s} is often tagged {o}", "critics describe {s} with the keyword {o}"]),
    ("has_genre", ["{s} belongs to the {o} genre", "{s} falls in the {o} category"]),
    ("has_imdb_rating", ["{s} is rated {o}", "{s} holds an imdb score of {o}"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Topic {
    Movie,
    Director,
    Writer,
    Actor,
}

struct Template {
    chain: &'static str,
    topic: Topic,
    phrasings: [&'static str; 2],
}

const fn t(chain: &'static str, topic: Topic, phrasings: [&'static str; 2]) -> Template {
    Template {
        chain,
        topic,
        phrasings,
    }
}

const ONE_HOP: &[Template] = &[
    t("directed_by", Topic::Movie, ["who directed [{}]", "who is the director of [{}]"]),
    t("written_by", Topic::Movie, ["who wrote [{}]", "who is the writer of [{}]"]),
    t("starred_actors", Topic::Movie, ["who starred in [{}]", "who acted in [{}]"]),
    t("release_year", Topic::Movie, ["when was [{}] released", "what year did [{}] come out"]),
    t("in_language", Topic::Movie, ["what language is [{}] in", "what language is spoken in [{}]"]),
    t("has_tags", Topic::Movie, ["what words describe [{}]", "what is [{}] about"]),
    t("has_genre", Topic::Movie, ["what genre is [{}]", "what kind of film is [{}]"]),
    t("has_imdb_rating", Topic::Movie, ["what is the imdb rating of [{}]", "how was [{}] rated"]),
    t("directed_by^-1", Topic::Director, ["what films did [{}] direct", "which movies were directed by [{}]"]),
    t("written_by^-1", Topic::Writer, ["what films did [{}] write", "which movies were written by [{}]"]),
    t("starred_actors^-1", Topic::Actor, ["what films did [{}] act in", "which movies star [{}]"]),
];

const TWO_HOP: &[Template] = &[
    t("written_by^-1,directed_by", Topic::Writer, [
        "who directed the films written by [{}]",
        "who are the directors of movies written by [{}]",
    ]),
    t("directed_by^-1,has_genre", Topic::Director, [
        "what genres are the films directed by [{}]",
        "what types of movies did [{}] direct",
    ]),
    t("directed_by^-1,starred_actors", Topic::Director, [
        "who acted in the films directed by [{}]",
        "who starred in movies directed by [{}]",
    ]),
    t("starred_actors^-1,in_language", Topic::Actor, [
        "what languages are the films starring [{}] in",
        "what languages do the movies of [{}] use",
    ]),
    t("written_by^-1,release_year", Topic::Writer, [
        "when were the films written by [{}] released",
        "what years did the movies written by [{}] come out",
    ]),
    t("directed_by,directed_by^-1", Topic::Movie, [
        "which films share the director of [{}]",
        "what other movies did the director of [{}] make",
    ]),
    t("starred_actors,starred_actors^-1", Topic::Movie, [
        "which films share actors with [{}]",
        "what movies have cast members in common with [{}]",
    ]),
    t("written_by,written_by^-1", Topic::Movie, [
        "which films share the writer of [{}]",
        "what other movies did the writer of [{}] write",
    ]),
    t("starred_actors^-1,has_tags", Topic::Actor, [
        "what words describe the films starring [{}]",
        "what are the movies of [{}] about",
    ]),
];

// Answers are people or films only: with few attribute values, a 3-hop question
// answered by a language or genre is a near-uniform vote over a handful of hubs.
const THREE_HOP: &[Template] = &[
    t("starred_actors,starred_actors^-1,directed_by", Topic::Movie, [
        "who directed the films that share actors with [{}]",
        "who are the directors of movies with cast members of [{}]",
    ]),
    t("written_by,written_by^-1,directed_by", Topic::Movie, [
        "who directed the films by the writer of [{}]",
        "who are the directors of movies by the writer of [{}]",
    ]),
    t("directed_by,directed_by^-1,starred_actors", Topic::Movie, [
        "who acted in the films by the director of [{}]",
        "who starred in movies made by the director of [{}]",
    ]),
    t("written_by,written_by^-1,starred_actors", Topic::Movie, [
        "who acted in the films by the writer of [{}]",
        "who starred in movies written by the writer of [{}]",
    ]),
    t("directed_by,directed_by^-1,written_by", Topic::Movie, [
        "who wrote the films by the director of [{}]",
        "who are the writers of movies made by the director of [{}]",
    ]),
    t("starred_actors^-1,directed_by,directed_by^-1", Topic::Actor, [
        "which films share directors with the films starring [{}]",
        "what movies were made by the directors of films with [{}]",
    ]),
    t("directed_by^-1,starred_actors,starred_actors^-1", Topic::Director, [
        "which films share actors with the films directed by [{}]",
        "what movies have cast members in common with films by [{}]",
    ]),
    t("written_by^-1,starred_actors,starred_actors^-1", Topic::Writer, [
        "which films share actors with the films written by [{}]",
        "what movies have cast members in common with films written by [{}]",
    ]),
];

const ADJECTIVES: [&str; 24] = [
    "Silent", "Crimson", "Broken", "Golden", "Hidden", "Last", "Midnight", "Northern", "Paper",
    "Quiet", "Restless", "Savage", "Electric", "Frozen", "Distant", "Velvet", "Burning", "Hollow",
    "Iron", "Lonely", "Scarlet", "Twisted", "Wandering", "Amber",
];
const NOUNS: [&str; 24] = [
    "Harbor", "Orchard", "Signal", "Empire", "Garden", "Frontier", "Mirror", "Voyage", "Canyon",
    "Letter", "Circus", "Lantern", "Island", "Station", "Compass", "Meadow", "Bridge", "Winter",
    "Kingdom", "Shadow", "River", "Horizon", "Engine", "Citadel",
];
const FIRST: [&str; 30] = [
    "Ava", "Boris", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Ingrid", "Jonas",
    "Karla", "Luca", "Mira", "Nils", "Olga", "Pavel", "Rosa", "Stefan", "Tessa", "Viktor",
    "Anton", "Bianca", "Carlos", "Daria", "Emil", "Freya", "Gustav", "Hanna", "Igor", "Julia",
];
const LAST: [&str; 30] = [
    "Abbott", "Brandt", "Castell", "Duval", "Eriksen", "Falk", "Gruber", "Holm", "Ivers",
    "Jansen", "Kovac", "Lindqvist", "Marlow", "Novak", "Orlov", "Petrov", "Quist", "Reyes",
    "Sorensen", "Thorne", "Ulrich", "Varga", "Wagner", "Yates", "Zeller", "Arnaud", "Berg",
    "Conti", "Dahl", "Engel",
];
// Attribute values are few, so they behave as hubs the way they do in real
// movie KBs.
const LANGUAGES: [&str; 4] = ["English", "French", "Spanish", "Japanese"];
const TAGS: [&str; 6] = ["heist", "time travel", "revenge", "friendship", "dystopia", "road trip"];
const GENRES: [&str; 5] = ["Drama", "Comedy", "Thriller", "Horror", "Western"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub seed: u64,
    pub movies: usize,
    pub directors: usize,
    pub writers: usize,
    pub actors: usize,
    pub train_per_hop: usize,
    pub dev_per_hop: usize,
    pub test_per_hop: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            movies: 400,
            directors: 150,
            writers: 200,
            actors: 500,
            train_per_hop: 200,
            dev_per_hop: 50,
            test_per_hop: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub facts: Vec<(String, String, String)>,
    /// Indexed by hop count minus one.
    pub train: [Vec<QaExample>; 3],
    pub dev: [Vec<QaExample>; 3],
    pub test: [Vec<QaExample>; 3],
}

fn pick_distinct(rng: &mut StableRng, pool: &[String], n: usize) -> Vec<String> {
    rng.sample_indices(pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

fn execute(kg: &KnowledgeGraph, topic: &str, chain: &InferentialChain) -> BTreeSet<String> {
    let Some(start) = kg.entity(topic) else {
        return BTreeSet::new();
    };
    let mut frontier = BTreeSet::from([start]);
    for step in &chain.steps {
        let Some(rel) = kg.resolve(&step.label) else {
            return BTreeSet::new();
        };
        frontier = frontier
            .iter()
            .flat_map(|&e| kg.step_targets(e, rel, step.direction))
            .collect();
    }
    frontier.remove(&start);
    frontier.iter().map(|&e| kg.entity_name(e).to_string()).collect()
}

impl SynthBenchmark {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        let mut rng = StableRng::new(cfg.seed);
        let mut titles = Vec::new();
        for a in ADJECTIVES {
            for n in NOUNS {
                titles.push(format!("{a} {n}"));
            }
        }
        let mut people = Vec::new();
        for f in FIRST {
            for l in LAST {
                people.push(format!("{f} {l}"));
            }
        }
        let n_people = cfg.directors + cfg.writers + cfg.actors;
        if cfg.movies > titles.len() || n_people > people.len() || cfg.movies == 0 || cfg.actors < 3 {
            return Err(Error::Config("synthetic benchmark sizes out of range".into()));
        }
        let movies = pick_distinct(&mut rng, &titles, cfg.movies);
        let persons = pick_distinct(&mut rng, &people, n_people);
        let directors = &persons[..cfg.directors];
        let writers = &persons[cfg.directors..cfg.directors + cfg.writers];
        let actors = &persons[cfg.directors + cfg.writers..];
        let years: Vec<String> = (2000..2008).map(|y| y.to_string()).collect();
        let ratings: Vec<String> = (0..6).map(|i| format!("{}.{}", 6 + i / 2, 5 * (i % 2))).collect();

        let mut facts = Vec::new();
        let mut add = |s: &str, r: &str, o: &str| facts.push((s.to_string(), r.to_string(), o.to_string()));
        for (i, m) in movies.iter().enumerate() {
            // every person gets at least one film while there are films left
            let d = if i < directors.len() { &directors[i] } else { &directors[rng.below_usize(directors.len())] };
            add(m, "directed_by", d);
            let w = if i < writers.len() { &writers[i] } else { &writers[rng.below_usize(writers.len())] };
            add(m, "written_by", w);
            let n_a = 2 + rng.below_usize(2);
            let mut cast: Vec<&String> = Vec::new();
            if i < actors.len() {
                cast.push(&actors[i]);
            }
            while cast.len() < n_a {
                let a = &actors[rng.below_usize(actors.len())];
                if !cast.contains(&a) {
                    cast.push(a);
                }
            }
            for a in cast {
                add(m, "starred_actors", a);
            }
            add(m, "release_year", &years[rng.below_usize(years.len())]);
            add(m, "in_language", LANGUAGES[rng.below_usize(LANGUAGES.len())]);
            let t1 = rng.below_usize(TAGS.len());
            add(m, "has_tags", TAGS[t1]);
            if rng.below(2) == 0 {
                let t2 = rng.below_usize(TAGS.len());
                if t2 != t1 {
                    add(m, "has_tags", TAGS[t2]);
                }
            }
            add(m, "has_genre", GENRES[rng.below_usize(GENRES.len())]);
            add(m, "has_imdb_rating", &ratings[rng.below_usize(ratings.len())]);
        }

        let mut bench = SynthBenchmark {
            facts,
            train: Default::default(),
            dev: Default::default(),
            test: Default::default(),
        };
        let kg = bench.kg();
        let topics = |t: Topic| -> &[String] {
            match t {
                Topic::Movie => &movies,
                Topic::Director => directors,
                Topic::Writer => writers,
                Topic::Actor => actors,
            }
        };
        let mut seen: HashSet<String> = HashSet::new();
        for (hop, templates) in [ONE_HOP, TWO_HOP, THREE_HOP].into_iter().enumerate() {
            // one shuffled pool of (question, answers, chain) per phrasing
            let mut pools: Vec<Vec<(String, Vec<String>, InferentialChain)>> = Vec::new();
            for tpl in templates {
                let chain: InferentialChain = tpl.chain.parse()?;
                for phr in tpl.phrasings {
                    let mut pool = Vec::new();
                    for topic in topics(tpl.topic) {
                        let answers = execute(&kg, topic, &chain);
                        if !answers.is_empty() {
                            pool.push((phr.replace("{}", topic), answers.into_iter().collect(), chain.clone()));
                        }
                    }
                    rng.shuffle(&mut pool);
                    pools.push(pool);
                }
            }
            let sizes = [
                (cfg.train_per_hop, "train"),
                (cfg.dev_per_hop, "dev"),
                (cfg.test_per_hop, "test"),
            ];
            let mut cursor = 0usize;
            for (split, (size, name)) in sizes.into_iter().enumerate() {
                let mut out = Vec::with_capacity(size);
                let mut stalled = 0;
                while out.len() < size {
                    if stalled > pools.len() {
                        return Err(Error::Config(format!(
                            "not enough distinct {}-hop questions for the {name} split",
                            hop + 1
                        )));
                    }
                    let n_pools = pools.len();
                    let pool = &mut pools[cursor % n_pools];
                    cursor += 1;
                    match pool.pop() {
                        Some((q, answers, chain)) if seen.insert(q.clone()) => {
                            stalled = 0;
                            out.push(QaExample {
                                id: format!("{name}-{}h-{:04}", hop + 1, out.len() + 1),
                                raw_question: q,
                                answers,
                                gold_chain: Some(chain),
                            });
                        }
                        Some(_) => {}
                        None => stalled += 1,
                    }
                }
                match split {
                    0 => bench.train[hop] = out,
                    1 => bench.dev[hop] = out,
                    _ => bench.test[hop] = out,
                }
            }
        }
        Ok(bench)
    }

    pub fn relations() -> Vec<String> {
        RELATIONS.iter().map(|s| s.to_string()).collect()
    }

    pub fn kg(&self) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        for r in RELATIONS {
            kg.declare_relation(r);
        }
        for (s, r, o) in &self.facts {
            kg.add_fact(s, r, o);
        }
        kg
    }

    pub fn all(split: &[Vec<QaExample>; 3]) -> Vec<QaExample> {
        split.iter().flatten().cloned().collect()
    }

    pub fn proxy_table() -> ProxyTextTable {
        ProxyTextTable::from_pairs(PROXY_TEXTS, &Self::relations())
            .map(|(t, _)| t)
            .unwrap_or_default()
    }

    pub fn kb_text(&self) -> String {
        let mut out = String::new();
        for (s, r, o) in &self.facts {
            let _ = writeln!(out, "{s}\t{r}\t{o}");
        }
        out
    }

    pub fn proxy_text_file() -> String {
        let mut out = String::new();
        for (r, t) in PROXY_TEXTS {
            let _ = writeln!(out, "{r}\t{t}");
        }
        out
    }

    /// Writes `kb.txt`, `proxies.txt`, `{train,dev,test}.txt` and per-hop
    /// `{split}_{h}hop.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: &str| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        write("kb.txt", &self.kb_text())?;
        write("proxies.txt", &Self::proxy_text_file())?;
        for (name, split) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            write(&format!("{name}.txt"), &serialize_qa(&Self::all(split)))?;
            for (h, exs) in split.iter().enumerate() {
                write(&format!("{name}_{}hop.txt", h + 1), &serialize_qa(exs))?;
            }
        }
        Ok(())
    }
}

/// One paraphrased sentence per fact, with both entities as mentions. Ids are
/// `{prefix}{n}` in the order given. Relations outside the movie domain get
/// `subject relation words object`.
pub fn fact_documents<'a, I>(facts: I, prefix: &str) -> Vec<Document>
where
    I: IntoIterator<Item = &'a (String, String, String)>,
{
    let sentences: BTreeMap<&str, [&str; 2]> = FACT_SENTENCES.into_iter().collect();
    let mut docs = Vec::new();
    for (i, (s, r, o)) in facts.into_iter().enumerate() {
        let fallback;
        let template = match sentences.get(r.as_str()) {
            Some(variants) => variants[i % 2],
            None => {
                fallback = format!("{{s}} {} {{o}}", r.replace('_', " "));
                fallback.as_str()
            }
        };
        let mut text = String::new();
        let mut mentions = Vec::new();
        let mut rest = template;
        while let Some(pos) = rest.find('{') {
            text.push_str(&rest[..pos]);
            let (entity, skip) = if rest[pos..].starts_with("{s}") { (s, 3) } else { (o, 3) };
            let start = text.chars().count();
            text.push_str(entity);
            mentions.push(Mention {
                entity: entity.clone(),
                start,
                end: start + entity.chars().count(),
            });
            rest = &rest[pos + skip..];
        }
        text.push_str(rest);
        docs.push(Document {
            doc_id: format!("{prefix}{}", i + 1),
            text,
            mentions,
        });
    }
    docs
}

/// Writes `docs.txt` and `mentions.txt` for `documents` into `dir`.
pub fn write_documents(dir: &Path, documents: &[Document]) -> Result<()> {
    let (d, m) = serialize_documents(documents);
    for (name, body) in [("docs.txt", d), ("mentions.txt", m)] {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_meet_the_benchmark_floor() {
        let b = SynthBenchmark::generate(&SynthConfig::default()).unwrap();
        let kg = b.kg();
        assert!(kg.entity_count() >= 50);
        assert_eq!(kg.relation_count(), 8);
        assert!(kg.symbolic_triple_count() >= 300);
        for h in 0..3 {
            assert_eq!(b.train[h].len(), 200);
            assert_eq!(b.dev[h].len(), 50);
            assert_eq!(b.test[h].len(), 100);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        let a = SynthBenchmark::generate(&cfg).unwrap();
        let b = SynthBenchmark::generate(&cfg).unwrap();
        assert_eq!(a.facts, b.facts);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn fact_documents_mark_both_entities() {
        let facts = [("Silent Harbor".to_string(), "directed_by".to_string(), "Ava Holm".to_string())];
        let docs = fact_documents(&facts, "d");
        assert_eq!(docs[0].text, "Ava Holm directed Silent Harbor");
        docs[0].validate().unwrap();
        assert_eq!(docs[0].first_span("Silent Harbor"), Some((18, 31)));
    }

    #[test]
    fn proxies_cover_relations() {
        assert_eq!(SynthBenchmark::proxy_table().len(), 8);
    }
}
