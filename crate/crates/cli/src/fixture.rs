//! The shipped toy benchmark: a small academic-world knowledge base and
//! 200 template questions.
//!
//! Files under `fixtures/toy/` are produced by [`generate`]; the
//! `fixtures_are_current` test fails when they drift (rerun it with
//! `UPDATE_FIXTURES=1` to rewrite them).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use kbqa_answerability::dataset::QuestionRecord;
use kbqa_answerability::kb::{load_kb, KnowledgeBase};
use kbqa_answerability::sexpr::{execute, parse};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::render_corpus;

pub const QUESTIONS: usize = 200;
const SEED: u64 = 20_240_611;

const RESEARCHERS: [(&str, &str); 12] = [
    ("ada", "Ada"),
    ("alan", "Alan"),
    ("grace", "Grace"),
    ("edsger", "Edsger"),
    ("barbara", "Barbara"),
    ("donald", "Donald"),
    ("john", "John"),
    ("leslie", "Leslie"),
    ("tony", "Tony"),
    ("frances", "Frances"),
    ("niklaus", "Niklaus"),
    ("ken", "Ken"),
];
const STUDENTS: [(&str, &str); 10] = [
    ("sam", "Sam"),
    ("kim", "Kim"),
    ("lee", "Lee"),
    ("max", "Max"),
    ("ana", "Ana"),
    ("eva", "Eva"),
    ("ivo", "Ivo"),
    ("tom", "Tom"),
    ("zoe", "Zoe"),
    ("raj", "Raj"),
];
const UNIVERSITIES: [(&str, &str); 5] = [
    ("north_u", "North University"),
    ("south_u", "South University"),
    ("east_u", "East University"),
    ("west_u", "West University"),
    ("central_u", "Central University"),
];
const COMPANIES: [(&str, &str); 4] =
    [("acme", "Acme"), ("globex", "Globex"), ("initech", "Initech"), ("umbrella", "Umbrella")];
const CITIES: [(&str, &str); 6] = [
    ("avalon", "Avalon"),
    ("brindle", "Brindle"),
    ("corvo", "Corvo"),
    ("dunmore", "Dunmore"),
    ("elmira", "Elmira"),
    ("fenwick", "Fenwick"),
];
const COUNTRIES: [(&str, &str); 3] = [("arcadia", "Arcadia"), ("borduria", "Borduria"), ("carpania", "Carpania")];
const VENUES: [(&str, &str); 3] =
    [("symp_a", "Symposium A"), ("conf_b", "Conference B"), ("journal_c", "Journal C")];
const AWARDS: [(&str, &str); 3] = [("medal_x", "the X Medal"), ("prize_y", "the Y Prize"), ("award_z", "the Z Award")];
const LABS: [(&str, &str); 2] = [("vision_lab", "the Vision Lab"), ("systems_lab", "the Systems Lab")];
const GRANTS: [(&str, &str); 2] = [("grant_alpha", "Grant Alpha"), ("grant_beta", "Grant Beta")];
const PAPERS: usize = 20;

fn paper(i: usize) -> String {
    format!("paper_{:02}", i + 1)
}

/// Schema text, facts text and the knowledge base they load into.
pub fn knowledge_base_text() -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut schema = String::from(
        "format_version 1
# toy academic world
type person
type researcher person
type student person
type org
type university org
type company org
type city
type country
type paper
type venue
type award
type lab org
type grant
type river
type language
relation works_at researcher university
relation studies_at student university
relation advises researcher student
relation born_in person city
relation employed_by person company
relation located_in org city
relation city_in city country
relation capital_of city country
relation authored person paper
relation published_in paper venue
relation cites paper paper
relation won person award
relation established award date
relation founded org date
relation population city integer
relation enrollment university integer
relation revenue company float
relation pub_year paper date
relation h_index researcher integer
relation hq_country company country
relation area_km2 country float
relation sister_city city city
relation editor_of researcher venue
relation ceo_of person company
relation mascot university string
relation spouse person person
relation prize_money award float
relation venue_rank venue integer
relation elevation city integer
relation part_of lab university
relation holds_grant researcher grant
relation grant_amount grant float
relation flows_through river city
relation official_language country language
",
    );
    for (i, (id, label)) in RESEARCHERS.iter().enumerate() {
        let tags = if i % 2 == 0 { "person,researcher" } else { "researcher" };
        let _ = writeln!(schema, "entity {id} {tags} {label}");
    }
    for (i, (id, label)) in STUDENTS.iter().enumerate() {
        let tags = if i % 2 == 0 { "person,student" } else { "student" };
        let _ = writeln!(schema, "entity {id} {tags} {label}");
    }
    for (id, label) in UNIVERSITIES {
        let _ = writeln!(schema, "entity {id} university {label}");
    }
    for (id, label) in COMPANIES {
        let _ = writeln!(schema, "entity {id} company {label}");
    }
    for (id, label) in CITIES {
        let _ = writeln!(schema, "entity {id} city {label}");
    }
    for (id, label) in COUNTRIES {
        let _ = writeln!(schema, "entity {id} country {label}");
    }
    for i in 0..PAPERS {
        let _ = writeln!(schema, "entity {} paper Paper {}", paper(i), i + 1);
    }
    for (id, label) in VENUES {
        let _ = writeln!(schema, "entity {id} venue {label}");
    }
    for (id, label) in AWARDS {
        let _ = writeln!(schema, "entity {id} award {label}");
    }
    for (id, label) in LABS {
        let _ = writeln!(schema, "entity {id} lab {label}");
    }
    for (id, label) in GRANTS {
        let _ = writeln!(schema, "entity {id} grant {label}");
    }
    schema.push_str("entity silver_river river the Silver River\n");
    schema.push_str("entity arcadian language Arcadian\nentity bordurian language Bordurian\n");

    let mut facts: Vec<String> = Vec::new();
    let mut add = |s: &str, r: &str, o: String| facts.push(format!("{s}\t{r}\t{o}"));
    let date = |y: i32| format!("\"{y}\"^^date");
    let int = |n: i64| format!("\"{n}\"^^integer");

    let people: Vec<&str> = RESEARCHERS.iter().chain(STUDENTS.iter()).map(|p| p.0).collect();
    for (i, (r, _)) in RESEARCHERS.iter().enumerate() {
        add(r, "works_at", UNIVERSITIES[i % 4].0.to_string());
        add(r, "h_index", int(rng.gen_range(8..60)));
    }
    for (i, (s, _)) in STUDENTS.iter().enumerate() {
        add(s, "studies_at", UNIVERSITIES[(i + 1) % 5].0.to_string());
        add(RESEARCHERS[(i * 5) % 12].0, "advises", s.to_string());
        if i % 3 == 0 {
            add(RESEARCHERS[(i * 5 + 3) % 12].0, "advises", s.to_string());
        }
    }
    for p in &people {
        add(p, "born_in", CITIES.choose(&mut rng).unwrap().0.to_string());
    }
    for p in people.iter().step_by(4) {
        add(p, "employed_by", COMPANIES.choose(&mut rng).unwrap().0.to_string());
    }
    for (i, (o, _)) in UNIVERSITIES.iter().chain(COMPANIES.iter()).enumerate() {
        add(o, "located_in", CITIES[i % 6].0.to_string());
        add(o, "founded", date(1850 + rng.gen_range(0..150)));
    }
    for (i, (u, _)) in UNIVERSITIES.iter().enumerate() {
        add(u, "enrollment", int(5_000 + 2_500 * i as i64 + rng.gen_range(0..900)));
    }
    for (i, (c, _)) in COMPANIES.iter().enumerate() {
        add(c, "revenue", format!("\"{:.1}\"^^float", 10.0 + 7.5 * i as f64 + rng.gen_range(0..10) as f64 / 10.0));
        add(c, "hq_country", COUNTRIES[i % 3].0.to_string());
    }
    for (i, (c, _)) in CITIES.iter().enumerate() {
        add(c, "city_in", COUNTRIES[i % 3].0.to_string());
        add(c, "population", int(40_000 * (i as i64 + 1) + rng.gen_range(0..9_000)));
    }
    for i in 0..3 {
        add(CITIES[i].0, "capital_of", COUNTRIES[i].0.to_string());
    }
    for i in 0..PAPERS {
        let p = paper(i);
        let n_authors = 1 + i % 3;
        let mut authors: Vec<&str> = people.choose_multiple(&mut rng, n_authors).copied().collect();
        authors.sort_unstable();
        for a in authors {
            add(a, "authored", p.clone());
        }
        add(&p, "published_in", VENUES[i % 3].0.to_string());
        add(&p, "pub_year", date(2000 + rng.gen_range(0..20)));
        if i > 0 {
            for j in (0..i).collect::<Vec<_>>().choose_multiple(&mut rng, 1 + i % 2) {
                add(&p, "cites", paper(*j));
            }
        }
    }
    let winners = ["ada", "alan", "grace", "donald", "leslie", "barbara", "sam"];
    for (i, w) in winners.iter().enumerate() {
        add(w, "won", AWARDS[i % 3].0.to_string());
    }
    for (i, (a, _)) in AWARDS.iter().enumerate() {
        add(a, "established", date(1950 + 17 * i as i32));
    }

    // long tail: relations and types used by one or two questions each
    let float = |x: f64| format!("\"{x:.1}\"^^float");
    for (i, (k, _)) in COUNTRIES.iter().enumerate() {
        add(k, "area_km2", float(12_000.0 + 9_500.5 * i as f64));
    }
    add("avalon", "sister_city", "corvo".into());
    add("brindle", "sister_city", "elmira".into());
    add("grace", "editor_of", "journal_c".into());
    add("ken", "editor_of", "conf_b".into());
    add("john", "ceo_of", "acme".into());
    add("eva", "ceo_of", "initech".into());
    add("north_u", "mascot", "\"owl\"^^string".into());
    add("east_u", "mascot", "\"heron\"^^string".into());
    add("ada", "spouse", "alan".into());
    add("leslie", "spouse", "frances".into());
    for (i, (a, _)) in AWARDS.iter().enumerate() {
        add(a, "prize_money", float(5_000.0 * (i + 1) as f64));
    }
    for (i, (v, _)) in VENUES.iter().enumerate() {
        add(v, "venue_rank", int(i as i64 + 1));
    }
    add("fenwick", "elevation", int(412));
    add("dunmore", "elevation", int(96));
    add("vision_lab", "part_of", "north_u".into());
    add("systems_lab", "part_of", "west_u".into());
    add("vision_lab", "located_in", "avalon".into());
    add("systems_lab", "located_in", "dunmore".into());
    add("barbara", "holds_grant", "grant_alpha".into());
    add("tony", "holds_grant", "grant_beta".into());
    add("grant_alpha", "grant_amount", float(250_000.0));
    add("grant_beta", "grant_amount", float(90_000.0));

    add("silver_river", "flows_through", "brindle".into());
    add("silver_river", "flows_through", "elmira".into());
    add("arcadia", "official_language", "arcadian".into());
    add("borduria", "official_language", "bordurian".into());
    add("carpania", "official_language", "arcadian".into());

    facts.sort();
    facts.dedup();
    let mut facts_text = String::from("#format_version\t1\n");
    for f in facts {
        facts_text.push_str(&f);
        facts_text.push('\n');
    }
    (schema, facts_text)
}

fn label_of(kb: &KnowledgeBase, id: &str) -> String {
    kb.entities().get(id).map(|e| e.label.clone()).filter(|l| !l.is_empty()).unwrap_or_else(|| id.to_string())
}

fn ids(list: &[(&str, &str)]) -> Vec<String> {
    list.iter().map(|(id, _)| id.to_string()).collect()
}

/// Every candidate question: (s-expression, question text).
fn candidates(kb: &KnowledgeBase) -> Vec<(String, String)> {
    let l = |id: &str| label_of(kb, id);
    let researchers = ids(&RESEARCHERS);
    let students = ids(&STUDENTS);
    let people: Vec<String> = researchers.iter().chain(students.iter()).cloned().collect();
    let unis = ids(&UNIVERSITIES);
    let companies = ids(&COMPANIES);
    let orgs: Vec<String> = unis.iter().chain(companies.iter()).cloned().collect();
    let cities = ids(&CITIES);
    let countries = ids(&COUNTRIES);
    let venues = ids(&VENUES);
    let awards = ids(&AWARDS);
    let papers: Vec<String> = (0..PAPERS).map(paper).collect();

    let mut out: Vec<(String, String)> = Vec::new();
    let mut each = |items: &[String], sexpr: &dyn Fn(&str) -> String, text: &dyn Fn(&str) -> String| {
        for x in items {
            out.push((sexpr(x), text(x)));
        }
    };
    each(&unis, &|x| format!("(JOIN works_at {x})"), &|x| format!("Who works at {}?", l(x)));
    each(&researchers, &|x| format!("(JOIN (R works_at) {x})"), &|x| format!("Where does {} work?", l(x)));
    each(&unis, &|x| format!("(JOIN studies_at {x})"), &|x| format!("Which students study at {}?", l(x)));
    each(&students, &|x| format!("(JOIN (R studies_at) {x})"), &|x| format!("Where does {} study?", l(x)));
    each(&researchers, &|x| format!("(JOIN (R advises) {x})"), &|x| format!("Whom does {} advise?", l(x)));
    each(&students, &|x| format!("(JOIN advises {x})"), &|x| format!("Who advises {}?", l(x)));
    each(&people, &|x| format!("(JOIN (R born_in) {x})"), &|x| format!("Where was {} born?", l(x)));
    each(&cities, &|x| format!("(JOIN born_in {x})"), &|x| format!("Who was born in {}?", l(x)));
    each(&orgs, &|x| format!("(JOIN (R located_in) {x})"), &|x| format!("In which city is {}?", l(x)));
    each(&cities, &|x| format!("(JOIN (R city_in) {x})"), &|x| format!("Which country is {} in?", l(x)));
    each(&countries, &|x| format!("(JOIN capital_of {x})"), &|x| format!("What is the capital of {}?", l(x)));
    each(&papers, &|x| format!("(JOIN authored {x})"), &|x| format!("Who wrote {}?", l(x)));
    each(&people, &|x| format!("(JOIN (R authored) {x})"), &|x| format!("Which papers did {} write?", l(x)));
    each(&papers, &|x| format!("(JOIN (R published_in) {x})"), &|x| format!("Where did {} appear?", l(x)));
    each(&venues, &|x| format!("(JOIN published_in {x})"), &|x| format!("Which papers appeared in {}?", l(x)));
    each(&papers, &|x| format!("(JOIN (R cites) {x})"), &|x| format!("Which papers does {} cite?", l(x)));
    each(&papers, &|x| format!("(JOIN cites {x})"), &|x| format!("Which papers cite {}?", l(x)));
    each(&awards, &|x| format!("(JOIN won {x})"), &|x| format!("Who has won {}?", l(x)));
    each(&people, &|x| format!("(JOIN (R won) {x})"), &|x| format!("Which awards has {} won?", l(x)));
    each(&awards, &|x| format!("(JOIN (R established) {x})"), &|x| format!("When was {} established?", l(x)));
    each(&orgs, &|x| format!("(JOIN (R founded) {x})"), &|x| format!("When was {} founded?", l(x)));
    each(&cities, &|x| format!("(JOIN (R population) {x})"), &|x| format!("How many people live in {}?", l(x)));
    each(&unis, &|x| format!("(JOIN (R enrollment) {x})"), &|x| format!("How many students does {} enroll?", l(x)));
    each(&companies, &|x| format!("(JOIN (R revenue) {x})"), &|x| format!("What is the revenue of {}?", l(x)));
    each(&papers, &|x| format!("(JOIN (R pub_year) {x})"), &|x| format!("When was {} published?", l(x)));
    each(&researchers, &|x| format!("(JOIN (R h_index) {x})"), &|x| format!("What is the h-index of {}?", l(x)));
    each(&companies, &|x| format!("(JOIN (R hq_country) {x})"), &|x| format!("In which country is {} headquartered?", l(x)));
    each(&companies, &|x| format!("(JOIN employed_by {x})"), &|x| format!("Who is employed by {}?", l(x)));
    each(&people, &|x| format!("(JOIN (R employed_by) {x})"), &|x| format!("Which company employs {}?", l(x)));

    each(&cities, &|x| format!("(AND researcher (JOIN born_in {x}))"), &|x| format!("Which researchers were born in {}?", l(x)));
    each(&cities, &|x| format!("(AND student (JOIN born_in {x}))"), &|x| format!("Which students were born in {}?", l(x)));
    each(&cities, &|x| format!("(AND university (JOIN located_in {x}))"), &|x| format!("Which universities are in {}?", l(x)));
    each(&cities, &|x| format!("(AND company (JOIN located_in {x}))"), &|x| format!("Which companies are based in {}?", l(x)));
    each(&awards, &|x| format!("(AND researcher (JOIN won {x}))"), &|x| format!("Which researchers have won {}?", l(x)));
    each(&venues, &|x| format!("(AND paper (JOIN published_in {x}))"), &|x| format!("List the papers published in {}.", l(x)));

    each(&cities, &|x| format!("(JOIN works_at (JOIN located_in {x}))"), &|x| format!("Who works at a university in {}?", l(x)));
    each(&people, &|x| format!("(JOIN (R city_in) (JOIN (R born_in) {x}))"), &|x| format!("In which country was {} born?", l(x)));
    each(&people, &|x| format!("(JOIN (R published_in) (JOIN (R authored) {x}))"), &|x| format!("Where has {} published?", l(x)));
    each(&unis, &|x| format!("(JOIN advises (JOIN studies_at {x}))"), &|x| format!("Who advises students of {}?", l(x)));
    each(&countries, &|x| format!("(JOIN born_in (JOIN city_in {x}))"), &|x| format!("Who was born in {}?", l(x)));

    each(&unis, &|x| format!("(COUNT (JOIN works_at {x}))"), &|x| format!("How many researchers work at {}?", l(x)));
    each(&people, &|x| format!("(COUNT (JOIN (R authored) {x}))"), &|x| format!("How many papers has {} written?", l(x)));
    each(&cities, &|x| format!("(COUNT (JOIN born_in {x}))"), &|x| format!("How many people were born in {}?", l(x)));

    each(&unis, &|x| format!("(ARGMAX (JOIN works_at {x}) h_index)"), &|x| format!("Who has the highest h-index at {}?", l(x)));
    each(&countries, &|x| format!("(ARGMAX (JOIN city_in {x}) population)"), &|x| format!("What is the largest city in {}?", l(x)));
    each(&people, &|x| format!("(ARGMIN (JOIN (R authored) {x}) pub_year)"), &|x| format!("What is the earliest paper by {}?", l(x)));
    out.push(("(ARGMAX researcher h_index)".into(), "Which researcher has the highest h-index?".into()));
    out.push(("(ARGMAX city population)".into(), "Which city is the most populous?".into()));
    out.push(("(ARGMIN university founded)".into(), "Which is the oldest university?".into()));
    out.push(("(ARGMAX university enrollment)".into(), "Which university enrolls the most students?".into()));
    out.push(("(ARGMAX company revenue)".into(), "Which company has the highest revenue?".into()));
    out.push(("(ARGMIN award established)".into(), "Which is the oldest award?".into()));

    for n in [20, 30, 40, 50] {
        out.push((
            format!("(AND researcher (gt h_index \"{n}\"^^integer))"),
            format!("Which researchers have an h-index above {n}?"),
        ));
    }
    for y in [2005, 2010, 2015] {
        out.push((format!("(AND paper (lt pub_year \"{y}\"^^date))"), format!("Which papers appeared before {y}?")));
    }
    for n in [100_000, 150_000] {
        out.push((format!("(AND city (ge population \"{n}\"^^integer))"), format!("Which cities have at least {n} people?")));
    }
    for y in [1900, 1950] {
        out.push((format!("(AND org (lt founded \"{y}\"^^date))"), format!("Which organisations were founded before {y}?")));
    }
    out
}

/// Questions over the long-tail relations and types; always included.
fn tail() -> Vec<(String, String)> {
    [
        ("(JOIN (R area_km2) arcadia)", "How large is Arcadia?"),
        ("(ARGMAX country area_km2)", "Which is the largest country by area?"),
        ("(AND city (JOIN (R sister_city) avalon))", "Which city is Avalon twinned with?"),
        ("(AND city (JOIN sister_city elmira))", "Which city counts Elmira as its sister city?"),
        ("(JOIN editor_of journal_c)", "Who edits Journal C?"),
        ("(AND venue (JOIN (R editor_of) ken))", "Which venue does Ken edit?"),
        ("(JOIN ceo_of acme)", "Who runs Acme?"),
        ("(JOIN (R mascot) north_u)", "What is the mascot of North University?"),
        ("(AND person (JOIN (R spouse) ada))", "Who is Ada married to?"),
        ("(JOIN spouse frances)", "Whose spouse is Frances?"),
        ("(JOIN (R prize_money) prize_y)", "How much money comes with the Y Prize?"),
        ("(ARGMAX venue venue_rank)", "Which venue has the highest rank number?"),
        ("(JOIN (R elevation) fenwick)", "How high is Fenwick?"),
        ("(JOIN part_of north_u)", "Which labs belong to North University?"),
        ("(AND university (JOIN (R part_of) systems_lab))", "Which university hosts the Systems Lab?"),
        ("(AND researcher (JOIN holds_grant grant_alpha))", "Who holds Grant Alpha?"),
        ("(JOIN (R grant_amount) grant_beta)", "How large is Grant Beta?"),
        ("(AND city (JOIN (R flows_through) silver_river))", "Which cities does the Silver River flow through?"),
        ("(AND country (JOIN official_language arcadian))", "In which countries is Arcadian an official language?"),
        ("(JOIN (R official_language) borduria)", "What is the official language of Borduria?"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// Builds the question corpus: the long-tail questions plus a seeded pick of
/// distinct bulk candidates with nonempty answers, 200 in all.
pub fn questions(kb: &KnowledgeBase) -> Vec<QuestionRecord> {
    let mut fixed: Vec<(String, String)> = Vec::new();
    let mut pool: Vec<(String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (sexpr, text) in tail() {
        let lf = parse(&sexpr).expect("template parses");
        let exec = execute(&lf, kb).expect("template is valid on the fixture");
        assert!(!exec.is_empty(), "{sexpr} has no answer");
        seen.insert(lf.to_string());
        fixed.push((lf.to_string(), text));
    }
    for (sexpr, text) in candidates(kb) {
        let lf = parse(&sexpr).expect("template parses");
        let canonical = lf.to_string();
        let exec = execute(&lf, kb).expect("template is valid on the fixture");
        if !exec.is_empty() && seen.insert(canonical.clone()) {
            pool.push((canonical, text));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
    pool.shuffle(&mut rng);
    pool.truncate(QUESTIONS - fixed.len());
    fixed.extend(pool);
    fixed.shuffle(&mut rng);
    fixed
        .into_iter()
        .enumerate()
        .map(|(i, (sexpr, text))| {
            let lf = parse(&sexpr).unwrap();
            let answers = execute(&lf, kb).unwrap().answers;
            QuestionRecord::answerable(format!("toy-{:03}", i + 1), text, lf, answers)
        })
        .collect()
}

/// The configuration shipped next to the fixture.
pub const CONFIG: &str = "\
format_version = 1
seed = 7

[paths]
schema = \"schema.txt\"
facts = \"facts.tsv\"
questions = \"questions.jsonl\"
out = \"out\"

[degrade]
target_unanswerable_fraction = 0.33
max_steps = 10000

[split]
train = 0.7
test = 0.2
dev = 0.1
iid = 0.5
partial_zero_shot = 0.375
full_zero_shot = 0.125

[report]
tolerance = 0.03
strict = false
";

/// File name and contents of every fixture file.
pub fn generate() -> Vec<(&'static str, String)> {
    let (schema, facts) = knowledge_base_text();
    let kb = load_kb(&schema, &facts).expect("fixture loads");
    let qs = questions(&kb);
    vec![
        ("schema.txt", schema),
        ("facts.tsv", facts),
        ("questions.jsonl", render_corpus(&qs)),
        ("config.toml", CONFIG.to_string()),
    ]
}
