//! Query-table construction for the uniform-prefetching scheme.
//!
//! Every database `n` works with the `K - m` messages it did not provide.
//! Rows are built round by round: round `r` holds, for every `r`-subset of
//! those messages, `(N-1)^(r-1)` rows. Subsets without the desired message
//! get fresh symbols. Subsets with it pair one fresh desired symbol with
//! interference the user can cancel: the uncached part of a round `r-1` row
//! downloaded from another database, plus fresh symbols of cached messages.
//! Each message is then independently permuted and each database's rows
//! shuffled.

mod plan;
mod render;
mod signature;
mod table;

pub use plan::{uniform_prefetch, PlanFile, PrefetchPlan};
pub use render::{
    message_prefix, render_csv, render_text, row_text, symbol_name, DatabaseQueries, RowRecord,
    TableRecord,
};
pub use signature::{structural_signature, StructuralSignature};
pub use table::{
    build_query_table, Layout, Mutation, PeelStep, QuerySpec, QueryTable, TableBuilder, Term,
};
