//! The five-entity toy knowledge base used throughout the docs and tests.
//!
//! Three types (`researcher` is a subtype of `person`), three relations and
//! seven facts.

pub const SCHEMA: &str = "\
format_version 1
type person
type researcher person
type org
relation works_at person org
relation founded_year org date
relation advises researcher person
entity a1 person,researcher Ada
entity a2 person,researcher Alan
entity a3 person Grace
entity o1 org Analytical Engines
entity o2 org Bletchley Park
";

pub const FACTS: &str = "\
a1\tworks_at\to1
a2\tworks_at\to1
a3\tworks_at\to1
o1\tfounded_year\t\"1990\"^^date
o2\tfounded_year\t\"2005\"^^date
a1\tadvises\ta2
a2\tadvises\ta3
";

pub fn knowledge_base() -> crate::kb::KnowledgeBase {
    crate::kb::load_kb(SCHEMA, FACTS).expect("toy fixture loads")
}
