//! DMN decision tables evaluated with a FEEL subset over three-valued logic.

pub mod decimal;
pub mod feel;
pub mod table;
pub mod value;

pub use decimal::Decimal;
pub use feel::{eval_expression, eval_unary_test, FeelError};
pub use table::{
    evaluate_table, evaluate_table_metered, parse_dmn, parse_dmn_all, DecisionTable, DmnParseError, HitPolicy, InputClause, Outcome,
    OutputClause, Rule, TableError,
};
pub use value::{Context, TriBool, Value};
