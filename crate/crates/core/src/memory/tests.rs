use super::*;
use crate::value::{Int, Value};

fn plain(tags: &[InstructionTag], initial: i64) -> Memory {
    Memory::new(InstructionSet::new(tags), Value::int(initial))
}

#[test]
fn test_and_set_strengthened_variant() {
    let mut mem = plain(&[InstructionTag::TestAndSet, InstructionTag::FetchAndAdd], 0);
    // On 0: returns 0 and sets to 1.
    assert_eq!(mem.apply(0, &Instruction::TestAndSet).unwrap(), Response::Value(Value::int(0)));
    assert_eq!(mem.peek_plain(0), Value::int(1));
    // On non-zero: returns the old value and leaves it unchanged.
    mem.apply(0, &Instruction::FetchAndAdd(Int::from(3i64))).unwrap();
    assert_eq!(mem.apply(0, &Instruction::TestAndSet).unwrap(), Response::Value(Value::int(4)));
    assert_eq!(mem.peek_plain(0), Value::int(4));
}

#[test]
fn fetch_and_add_two() {
    let mut mem = plain(&[InstructionTag::FetchAndAdd], 0);
    let resp = mem.apply(0, &Instruction::FetchAndAdd(Int::from(2i64))).unwrap();
    assert_eq!(resp, Response::Value(Value::int(0)));
    assert_eq!(mem.peek_plain(0), Value::int(2));
}

#[test]
fn buffer_read_pads_left_with_bottom() {
    let mut mem = Memory::new(InstructionSet::buffers(3), Value::Bottom);
    mem.apply(5, &Instruction::BufferWrite(Value::int(7))).unwrap();
    let resp = mem.apply(5, &Instruction::BufferRead).unwrap();
    assert_eq!(
        resp,
        Response::Value(Value::rec(vec![Value::Bottom, Value::Bottom, Value::int(7)]))
    );
}

#[test]
fn write_max_keeps_larger_value() {
    let mut mem = Memory::new(
        InstructionSet::new(&[InstructionTag::ReadMax, InstructionTag::WriteMax]),
        Value::int(5),
    );
    mem.apply(0, &Instruction::WriteMax(Value::int(3))).unwrap();
    assert_eq!(mem.apply(0, &Instruction::ReadMax).unwrap(), Response::Value(Value::int(5)));
    mem.apply(0, &Instruction::WriteMax(Value::int(9))).unwrap();
    assert_eq!(mem.apply(0, &Instruction::ReadMax).unwrap(), Response::Value(Value::int(9)));
}

#[test]
fn multiply_is_void() {
    let mut mem = plain(&[InstructionTag::Read, InstructionTag::Multiply], 12);
    assert_eq!(mem.apply(0, &Instruction::Multiply(Int::from(5i64))).unwrap(), Response::Ack);
    assert_eq!(mem.apply(0, &Instruction::Read).unwrap(), Response::Value(Value::int(60)));
}

#[test]
fn uniformity_rejects_foreign_instructions() {
    let mut mem = plain(&[InstructionTag::Read], 0);
    let err = mem.apply(0, &Instruction::Swap(Value::int(1))).unwrap_err();
    assert!(matches!(err, MemoryError::UnsupportedInstruction { .. }));
    // A failed step must not count as an access.
    assert_eq!(mem.touched_count(), 0);
}

#[test]
fn multi_assign_rejects_duplicate_locations() {
    let mut mem = Memory::new(InstructionSet::buffers_with_multi_assign(2), Value::Bottom);
    let err = mem
        .apply(
            0,
            &Instruction::MultiAssign(vec![(1, Value::int(1)), (1, Value::int(2))]),
        )
        .unwrap_err();
    assert!(matches!(err, MemoryError::MalformedArgument(_)));
}

#[test]
fn multi_assign_lands_atomically() {
    // Every interleaving of one multi-assign step and one buffer-read step:
    // the read sees both writes or neither.
    for reader_first in [true, false] {
        let mut mem = Memory::new(InstructionSet::buffers_with_multi_assign(2), Value::Bottom);
        let assign =
            Instruction::MultiAssign(vec![(0, Value::int(10)), (1, Value::int(20))]);
        if reader_first {
            let r0 = mem.apply(0, &Instruction::BufferRead).unwrap();
            let r1 = mem.apply(1, &Instruction::BufferRead).unwrap();
            assert_eq!(r0, Response::Value(Value::rec(vec![Value::Bottom, Value::Bottom])));
            assert_eq!(r1, Response::Value(Value::rec(vec![Value::Bottom, Value::Bottom])));
            mem.apply(0, &assign).unwrap();
        } else {
            mem.apply(0, &assign).unwrap();
            let r0 = mem.apply(0, &Instruction::BufferRead).unwrap();
            let r1 = mem.apply(1, &Instruction::BufferRead).unwrap();
            assert_eq!(r0, Response::Value(Value::rec(vec![Value::Bottom, Value::int(10)])));
            assert_eq!(r1, Response::Value(Value::rec(vec![Value::Bottom, Value::int(20)])));
        }
    }
}

#[test]
fn buffer_window_matches_slicing_oracle() {
    // For every write-history length k ≤ 2ℓ+1, the window equals the
    // right-aligned suffix of length min(k, ℓ), ⊥-padded on the left.
    for ell in 1..=4usize {
        for k in 0..=(2 * ell + 1) {
            let mut mem = Memory::new(InstructionSet::buffers(ell), Value::Bottom);
            let writes: Vec<Value> = (0..k as i64).map(|i| Value::int(100 + i)).collect();
            for w in &writes {
                mem.apply(0, &Instruction::BufferWrite(w.clone())).unwrap();
            }
            let got = match mem.apply(0, &Instruction::BufferRead).unwrap() {
                Response::Value(Value::Record(slots)) => slots,
                other => panic!("unexpected response {other:?}"),
            };
            let mut expect = vec![Value::Bottom; ell];
            let take = k.min(ell);
            expect[ell - take..].clone_from_slice(&writes[k - take..]);
            assert_eq!(got, expect, "ell={ell} k={k}");
        }
    }
}

#[test]
fn max_register_reads_are_monotone() {
    let mut mem = Memory::new(
        InstructionSet::new(&[InstructionTag::ReadMax, InstructionTag::WriteMax]),
        Value::int(0),
    );
    let writes = [4i64, 2, 9, 1, 9, 3, 11, 0];
    let mut last = Value::int(0);
    for w in writes {
        mem.apply(0, &Instruction::WriteMax(Value::int(w))).unwrap();
        let got = match mem.apply(0, &Instruction::ReadMax).unwrap() {
            Response::Value(v) => v,
            _ => unreachable!(),
        };
        assert!(got >= last);
        last = got;
    }
}

#[test]
fn touched_count_is_distinct_indices() {
    let mut mem = plain(&[InstructionTag::Read, InstructionTag::Write], 0);
    assert_eq!(mem.touched_count(), 0);
    mem.apply(3, &Instruction::Read).unwrap();
    mem.apply(3, &Instruction::Write(Value::int(1))).unwrap();
    mem.apply(0, &Instruction::Read).unwrap();
    assert_eq!(mem.touched_count(), 2);
    mem.apply(7, &Instruction::Read).unwrap();
    assert_eq!(mem.touched_count(), 3);
}

#[test]
fn apply_is_deterministic() {
    let build = || {
        let mut mem = plain(&[InstructionTag::Read, InstructionTag::Swap], 0);
        let r1 = mem.apply(0, &Instruction::Swap(Value::int(5))).unwrap();
        let r2 = mem.apply(1, &Instruction::Read).unwrap();
        (mem, r1, r2)
    };
    assert_eq!(build(), build());
}

fn tiny_config() -> Configuration {
    let mut mem = plain(&[InstructionTag::Read, InstructionTag::Write], 0);
    mem.apply(0, &Instruction::Write(Value::int(42))).unwrap();
    Configuration {
        memory: mem,
        processes: vec![
            ProcessEntry {
                state: Value::rec(vec![Value::int(1), Value::Bottom]),
                poised: Some((0, Instruction::Read)),
                status: ProcessStatus::Running,
            },
            ProcessEntry {
                state: Value::int(9),
                poised: None,
                status: ProcessStatus::Decided(Value::int(2)),
            },
        ],
        steps: 17,
    }
}

#[test]
fn snapshot_restore_roundtrip() {
    let config = tiny_config();
    let image = config.snapshot();
    let back = Configuration::restore(&image).unwrap();
    assert_eq!(back, config);
    assert_eq!(back.snapshot(), image);
}

#[test]
fn restore_rejects_corrupted_image() {
    let config = tiny_config();
    let mut image = config.snapshot();
    // Flip a byte in the body.
    let mid = image.0.len() / 2;
    image.0[mid] ^= 0x40;
    assert!(matches!(
        Configuration::restore(&image),
        Err(ImageError::Integrity) | Err(ImageError::Version(_))
    ));
    // Truncate.
    let short = ConfigurationImage(config.snapshot().0[..10].to_vec());
    assert!(Configuration::restore(&short).is_err());
    // Wrong magic.
    let mut bad = config.snapshot();
    bad.0[0] = b'X';
    assert_eq!(Configuration::restore(&bad), Err(ImageError::BadMagic));
}

#[test]
fn fingerprint_matches_image_identity() {
    let a = tiny_config();
    let mut b = tiny_config();
    assert_eq!(a.fingerprint(), b.fingerprint());
    b.steps += 1;
    assert_ne!(a.fingerprint(), b.fingerprint());
}
