//! Objects in one specialization hierarchy, with subsumption, queries and
//! conflict detection.

mod kb_store;
mod link;
mod object;
mod ontology;
mod subsume;

pub use kb_store::{
    AuthorFilter, Conflict, ConflictReport, EdgeKind, QueryFilter, QueryResult, ScoreView, Store,
    StoreError, Subgraph,
};
pub use link::{Annotation, Direction, LinkId, LinkKind, LinkKindParseError, LinkRecord, LinkTarget};
pub use object::{
    term_author, IdParseError, KbObject, ObjectId, ObjectKind, Payload, Placement, Timestamp, UserId,
    SYSTEM_USER,
};
pub use ontology::{Ontology, OntologyError, Signature};
pub use subsume::{conflicting, equivalent, subsumes, unsatisfiable};
