//! FL sentences used as fixtures throughout the crate, the CLI and the
//! acceptance suite. Terms without a prefix belong to the creator `p`
//! (parse with [`crate::fl::ParseContext::with_default_source`]).

/// "there is a man named Joe that has at least 1 leg", chain form.
pub const JOE_CHAIN: &str = r#"a p#man with p#name "Joe" and has for p#part a p#leg"#;

/// Same sentence in frame form.
pub const JOE_FRAME: &str = r#"a p#man p#name: "Joe", p#part: a p#leg;"#;

pub const MEN_AT_MOST_TWO_LEGS: &str = "every p#man has for p#part at most 2 p#leg";

/// Belief of Dr Foo about healthy birds in France in 2012.
pub const DR_FOO: &str = "p#DrFoo p#believer of ` ` `at least 78% of p#healthy p#bird can be p#agent of a p#flight` with p#place p#France' with p#time 2012`";

pub const INFORMATION_SHARING: &str = r#"information_sharing
  subtask: information_diffusion information_retrieval
           (information_validation subtype: peer_reviewing),
  object: 1.* information_object,
  rule: "the more precise the shared information_object, the better for
        information sharing and re-use"; //argumentation structure below
"#;

/// Rule with an argument and an objection; the objection carries a
/// corrective precision and, on the objection link itself, an author and a
/// nested objection.
pub const ARGUMENTATION: &str = r#""the more precise the shared p#information_object, the better for
information sharing and re-use"
argument: ("the more precise an information object, the easier it is
to handle automatically and correctly"
specialization_or_equivalent_object:
p# if `?o1 specialization: ?o2`
then `?o1 "is easier to handle correctly than":
?o2` ),
objection: (p#"the more precise an information object,
the more difficult this object is to write"
corrective_precision: //by "p" (the default source here)
"giving more precision takes more time to
write and is sometimes more difficult"
) __[ author: oc, //but the author of the next objection is "p":
objection: "someone spending time to share information
generally does not mind spending a bit more
time to make it more accessible and used" ];
"#;

/// Every corpus sentence, with its fixture name.
pub const ALL: &[(&str, &str)] = &[
    ("joe_chain", JOE_CHAIN),
    ("joe_frame", JOE_FRAME),
    ("men_at_most_two_legs", MEN_AT_MOST_TWO_LEGS),
    ("dr_foo", DR_FOO),
    ("information_sharing", INFORMATION_SHARING),
    ("argumentation", ARGUMENTATION),
];

/// Creator assumed for unprefixed corpus terms.
pub const DEFAULT_SOURCE: &str = "p";
