//! Ground-truth interpreter for hidden programs.
//!
//! Conditions pick a digit from the full scene at every step (selection is
//! with replacement), operations fold left to right over a working value,
//! and answers encode into 11-bit two's complement.

use crate::dsl::{Condition, Operation, Program};
use crate::scene::{Position, Scene};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("value {0} outside the 11-bit two's complement range [-1024, 1023]")]
    OutOfRange(i64),
}

/// Step-by-step record of one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecTrace {
    /// Position chosen by each used condition (`operations.len() + 1` entries).
    pub selected_positions: Vec<Position>,
    /// Working values `h_0..h_L` (`operations.len() + 1` entries).
    pub intermediate_values: Vec<i64>,
}

/// Resolves a condition to a position on the full scene.
///
/// `max`/`min` compare signed values; ties break in the default order
/// left, right, bottom.
pub fn select_digit(scene: &Scene, condition: Condition) -> Position {
    match condition {
        Condition::Left => Position::Left,
        Condition::Right => Position::Right,
        Condition::Bottom => Position::Bottom,
        Condition::Max => extreme(scene, |best, cand| cand > best),
        Condition::Min => extreme(scene, |best, cand| cand < best),
    }
}

fn extreme(scene: &Scene, beats: impl Fn(i64, i64) -> bool) -> Position {
    let mut best = Position::Left;
    for p in [Position::Right, Position::Bottom] {
        if beats(scene.value(best), scene.value(p)) {
            best = p;
        }
    }
    best
}

/// Applies one binary operation.
///
/// `or`/`xor` act bitwise on the absolute values and return a non-negative
/// result; `cat` is `x*10 + y`, `invcat` is `y*10 + x`.
pub fn apply_operation(op: Operation, x: i64, y: i64) -> i64 {
    match op {
        Operation::Add => x + y,
        Operation::Sub => x - y,
        Operation::Or => x.abs() | y.abs(),
        Operation::Xor => x.abs() ^ y.abs(),
        Operation::Cat => x * 10 + y,
        Operation::InvCat => y * 10 + x,
    }
}

/// Runs a program on a scene, returning the final value and the full trace.
///
/// `h_0` is the value selected by the first condition; step `t` computes
/// `h_t = op_t(h_{t-1}, value(select(cond_{t+1})))`.
pub fn execute(program: &Program, scene: &Scene) -> (i64, ExecTrace) {
    let conds = program.used_conditions();
    let mut selected_positions = Vec::with_capacity(conds.len());
    let mut intermediate_values = Vec::with_capacity(conds.len());

    let first = select_digit(scene, conds[0]);
    selected_positions.push(first);
    let mut h = scene.value(first);
    intermediate_values.push(h);

    for (op, &cond) in program.operations().iter().zip(&conds[1..]) {
        let pos = select_digit(scene, cond);
        selected_positions.push(pos);
        h = apply_operation(*op, h, scene.value(pos));
        intermediate_values.push(h);
    }
    (h, ExecTrace { selected_positions, intermediate_values })
}

/// Final value only, no trace allocation; used by exhaustive sweeps and the
/// induction solver's inner loop.
pub fn execute_value(program: &Program, scene: &Scene) -> i64 {
    let conds = program.used_conditions();
    let mut h = scene.value(select_digit(scene, conds[0]));
    for (op, &cond) in program.operations().iter().zip(&conds[1..]) {
        h = apply_operation(*op, h, scene.value(select_digit(scene, cond)));
    }
    h
}

pub const ANSWER_BITS: usize = 11;
pub const ANSWER_MIN: i64 = -1024;
pub const ANSWER_MAX: i64 = 1023;

/// Encodes a value as 11 bits, LSB first, two's complement.
pub fn encode11(v: i64) -> Result<[u8; ANSWER_BITS], ExecError> {
    if !(ANSWER_MIN..=ANSWER_MAX).contains(&v) {
        return Err(ExecError::OutOfRange(v));
    }
    let raw = (v as u64) & 0x7FF;
    Ok(std::array::from_fn(|i| ((raw >> i) & 1) as u8))
}

/// Inverse of [`encode11`].
pub fn decode11(bits: &[u8; ANSWER_BITS]) -> i64 {
    let mut v: i64 = 0;
    for (i, &b) in bits.iter().enumerate().take(ANSWER_BITS - 1) {
        v += i64::from(b & 1) << i;
    }
    v - (i64::from(bits[ANSWER_BITS - 1] & 1) << (ANSWER_BITS - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, Grammar};
    use crate::scene::scene_from_values;
    use proptest::prelude::*;

    #[test]
    fn select_picks_extremes_with_signed_comparison() {
        let s = scene_from_values([4, -5, 7]);
        assert_eq!(select_digit(&s, Condition::Max), Position::Bottom);
        let s = scene_from_values([-9, 4, 0]);
        assert_eq!(select_digit(&s, Condition::Min), Position::Left);
    }

    #[test]
    fn select_ties_break_left_right_bottom() {
        let s = scene_from_values([7, 7, 3]);
        assert_eq!(select_digit(&s, Condition::Max), Position::Left);
        let s = scene_from_values([5, 2, 2]);
        assert_eq!(select_digit(&s, Condition::Min), Position::Right);
    }

    #[test]
    fn operation_formulas() {
        assert_eq!(apply_operation(Operation::Cat, -3, 5), -25);
        assert_eq!(apply_operation(Operation::InvCat, 2, 9), 92);
        assert_eq!(apply_operation(Operation::Xor, 6, 3), 5);
        assert_eq!(apply_operation(Operation::Or, 6, 3), 7);
        assert_eq!(apply_operation(Operation::Add, -4, 9), 5);
        assert_eq!(apply_operation(Operation::Sub, -4, 9), -13);
    }

    // Hand-folded: h0 = 4, h1 = 4 + (-5) = -1, h2 = -1 - 7 = -8.
    #[test]
    fn execute_folds_left_to_right() {
        let scene = scene_from_values([4, -5, 7]);
        let program = parse_program("left,right,bottom | add,sub").unwrap();
        let (out, trace) = execute(&program, &scene);
        assert_eq!(out, -8);
        assert_eq!(trace.intermediate_values, vec![4, -1, -8]);
        assert_eq!(
            trace.selected_positions,
            vec![Position::Left, Position::Right, Position::Bottom]
        );
    }

    #[test]
    fn single_operation_ignores_third_condition() {
        let scene = scene_from_values([4, -5, 7]);
        let program = parse_program("left,right,bottom | add").unwrap();
        let (out, trace) = execute(&program, &scene);
        assert_eq!(out, -1);
        assert_eq!(trace.intermediate_values.len(), 2);
    }

    // With-replacement semantics: max re-selects the same digit each step.
    #[test]
    fn conditions_reevaluate_on_the_full_scene() {
        let scene = scene_from_values([2, 5, -1]);
        let program = parse_program("max,max,max | add,add").unwrap();
        assert_eq!(execute(&program, &scene).0, 15);
    }

    #[test]
    fn encode11_known_values() {
        assert_eq!(encode11(4).unwrap(), [0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(encode11(-1).unwrap(), [1; 11]);
        assert_eq!(encode11(1024), Err(ExecError::OutOfRange(1024)));
        assert_eq!(encode11(-1025), Err(ExecError::OutOfRange(-1025)));
    }

    #[test]
    fn encode11_round_trips_over_full_range() {
        for v in ANSWER_MIN..=ANSWER_MAX {
            assert_eq!(decode11(&encode11(v).unwrap()), v);
        }
    }

    #[test]
    fn cat_invcat_duality_and_bitwise_identities() {
        for x in -99..=99i64 {
            for y in -99..=99i64 {
                assert_eq!(
                    apply_operation(Operation::Cat, x, y),
                    apply_operation(Operation::InvCat, y, x)
                );
                assert_eq!(
                    apply_operation(Operation::Add, x, y),
                    apply_operation(Operation::Add, y, x)
                );
                assert_eq!(
                    apply_operation(Operation::Sub, x, y),
                    -apply_operation(Operation::Sub, y, x)
                );
            }
            assert_eq!(apply_operation(Operation::Or, x, x), x.abs());
            assert_eq!(apply_operation(Operation::Xor, x, x), 0);
        }
    }

    proptest! {
        // Replaying the trace through apply_operation reproduces the output.
        #[test]
        fn trace_replays_to_output(values in proptest::array::uniform3(-9i64..=9),
                                   idx in 0usize..5250) {
            let programs = crate::dsl::enumerate_programs(&Grammar::full());
            let program = &programs[idx % programs.len()];
            let scene = scene_from_values(values);
            let (out, trace) = execute(program, &scene);
            let mut h = trace.intermediate_values[0];
            for (op, pos) in program.operations().iter().zip(&trace.selected_positions[1..]) {
                h = apply_operation(*op, h, scene.value(*pos));
            }
            prop_assert_eq!(h, out);
            prop_assert_eq!(h, execute_value(program, &scene));
        }
    }
}
