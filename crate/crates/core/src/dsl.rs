//! The condition/operation grammar for hidden programs.
//!
//! A program is a sequence of exactly three digit-selection conditions plus
//! one or two binary operations folded left to right. The textual notation
//! `<c1>,<c2>,<c3> | <op1>[,<op2>]` is the canonical form stored in
//! manifests and task files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A digit-selection condition.
///
/// The declaration order (left, right, bottom, max, min) is the canonical
/// ordering used everywhere: enumeration, tie-breaking and index encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    Left,
    Right,
    Bottom,
    Max,
    Min,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Left,
        Condition::Right,
        Condition::Bottom,
        Condition::Max,
        Condition::Min,
    ];

    pub const POSITIONS: [Condition; 3] = [Condition::Left, Condition::Right, Condition::Bottom];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Left => "left",
            Condition::Right => "right",
            Condition::Bottom => "bottom",
            Condition::Max => "max",
            Condition::Min => "min",
        }
    }

    pub fn is_position(self) -> bool {
        matches!(self, Condition::Left | Condition::Right | Condition::Bottom)
    }

    fn from_token(tok: &str) -> Option<Self> {
        Condition::ALL.into_iter().find(|c| c.name() == tok)
    }
}

/// A binary operation over signed integers.
///
/// Declaration order (add, sub, or, xor, cat, invcat) is the canonical
/// operation ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    Add,
    Sub,
    Or,
    Xor,
    Cat,
    InvCat,
}

impl Operation {
    pub const ALL: [Operation; 6] = [
        Operation::Add,
        Operation::Sub,
        Operation::Or,
        Operation::Xor,
        Operation::Cat,
        Operation::InvCat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Add => "add",
            Operation::Sub => "sub",
            Operation::Or => "or",
            Operation::Xor => "xor",
            Operation::Cat => "cat",
            Operation::InvCat => "invcat",
        }
    }

    fn from_token(tok: &str) -> Option<Self> {
        Operation::ALL.into_iter().find(|o| o.name() == tok)
    }
}

/// A hidden task: three selection conditions plus one or two operations.
///
/// Execution uses the first `operations.len() + 1` conditions; a trailing
/// third condition of a one-operation program is inert.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    conditions: [Condition; 3],
    operations: Vec<Operation>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("wrong arity: expected 3 conditions and 1 or 2 operations, got {conditions} and {operations}")]
    WrongArity { conditions: usize, operations: usize },
    #[error("grammar must allow at least one condition and one operation")]
    EmptyGrammar,
    #[error("max_operations must be 1 or 2, got {0}")]
    BadMaxOperations(usize),
}

impl Program {
    pub fn new(conditions: [Condition; 3], operations: Vec<Operation>) -> Result<Self, DslError> {
        if operations.is_empty() || operations.len() > 2 {
            return Err(DslError::WrongArity { conditions: 3, operations: operations.len() });
        }
        Ok(Self { conditions, operations })
    }

    pub fn conditions(&self) -> &[Condition; 3] {
        &self.conditions
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    /// The condition sequence actually consumed: `operations.len() + 1`.
    pub fn used_conditions(&self) -> &[Condition] {
        &self.conditions[..self.operations.len() + 1]
    }
}

/// Parses the canonical `<c1>,<c2>,<c3> | <op1>[,<op2>]` notation.
///
/// Whitespace around tokens and separators is ignored.
pub fn parse_program(text: &str) -> Result<Program, DslError> {
    let mut halves = text.splitn(2, '|');
    let cond_part = halves.next().unwrap_or("");
    let op_part = halves.next().unwrap_or("");

    let conds: Vec<&str> = split_tokens(cond_part);
    let ops: Vec<&str> = split_tokens(op_part);
    if conds.len() != 3 || ops.is_empty() || ops.len() > 2 {
        return Err(DslError::WrongArity { conditions: conds.len(), operations: ops.len() });
    }

    let mut conditions = [Condition::Left; 3];
    for (slot, tok) in conditions.iter_mut().zip(&conds) {
        *slot = Condition::from_token(tok).ok_or_else(|| DslError::UnknownToken(tok.to_string()))?;
    }
    let operations = ops
        .iter()
        .map(|tok| Operation::from_token(tok).ok_or_else(|| DslError::UnknownToken(tok.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    Program::new(conditions, operations)
}

fn split_tokens(part: &str) -> Vec<&str> {
    part.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

/// Renders a program in canonical form, e.g. `left,right,bottom | add,sub`.
pub fn format_program(program: &Program) -> String {
    let conds: Vec<&str> = program.conditions.iter().map(|c| c.name()).collect();
    let ops: Vec<&str> = program.operations.iter().map(|o| o.name()).collect();
    format!("{} | {}", conds.join(","), ops.join(","))
}

/// A subset of the primitive space, defining which programs exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    conditions: Vec<Condition>,
    operations: Vec<Operation>,
    max_operations: usize,
}

impl Grammar {
    /// Builds a grammar from primitive subsets.
    ///
    /// The stored lists follow canonical ordering regardless of input order.
    pub fn new(
        conditions: &[Condition],
        operations: &[Operation],
        max_operations: usize,
    ) -> Result<Self, DslError> {
        if conditions.is_empty() || operations.is_empty() {
            return Err(DslError::EmptyGrammar);
        }
        if !(1..=2).contains(&max_operations) {
            return Err(DslError::BadMaxOperations(max_operations));
        }
        let conditions: Vec<Condition> =
            Condition::ALL.into_iter().filter(|c| conditions.contains(c)).collect();
        let operations: Vec<Operation> =
            Operation::ALL.into_iter().filter(|o| operations.contains(o)).collect();
        Ok(Self { conditions, operations, max_operations })
    }

    /// Positions-only conditions with add/sub.
    pub fn easy() -> Self {
        Grammar::new(&Condition::POSITIONS, &[Operation::Add, Operation::Sub], 2).unwrap()
    }

    /// All five conditions, all six operations.
    pub fn full() -> Self {
        Grammar::new(&Condition::ALL, &Operation::ALL, 2).unwrap()
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    pub fn max_operations(&self) -> usize {
        self.max_operations
    }
}

/// All length-3 condition sequences over the grammar, lexicographic in the
/// canonical condition order, repetition allowed.
pub fn enumerate_condition_sequences(grammar: &Grammar) -> Vec<[Condition; 3]> {
    let cs = &grammar.conditions;
    let mut out = Vec::with_capacity(cs.len().pow(3));
    for &a in cs {
        for &b in cs {
            for &c in cs {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// All operation sequences up to `max_operations`: every length-1 sequence
/// first, then every length-2, lexicographic within each length.
pub fn enumerate_operation_sequences(grammar: &Grammar) -> Vec<Vec<Operation>> {
    let ops = &grammar.operations;
    let mut out = Vec::new();
    for &a in ops {
        out.push(vec![a]);
    }
    if grammar.max_operations >= 2 {
        for &a in ops {
            for &b in ops {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

/// Every program of the grammar in canonical order: condition-sequence major,
/// operation-sequence minor. This order defines the solver's `first` policy.
pub fn enumerate_programs(grammar: &Grammar) -> Vec<Program> {
    let conds = enumerate_condition_sequences(grammar);
    let ops = enumerate_operation_sequences(grammar);
    let mut out = Vec::with_capacity(conds.len() * ops.len());
    for c in &conds {
        for o in &ops {
            out.push(Program { conditions: *c, operations: o.clone() });
        }
    }
    out
}
