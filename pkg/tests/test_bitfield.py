"""Tests for packed bit fields and the word-level operations on them"""

import tracemalloc

import numpy as np
import pytest

from bitfield import (
    SCAN_CHUNK_WORDS,
    BitField,
    check_width,
    first_unset_word,
    is_all_ones,
    or_accumulate,
    replicate_double,
    resize,
    shift_into_upper,
    tile,
)
from data_models import OpCounters
from errors import ContractViolation, WidthCapExceeded


class TestBitFieldBasics:
    """Construction, conversion and inspection of bit fields"""

    def test_zeros_and_ones(self):
        """Test all-zero and all-one fields, including a partial last word"""
        assert BitField.zeros(8).to_bignat() == 0
        assert BitField.ones(8).to_bignat() == 255
        field = BitField.ones(100)
        assert len(field.words) == 2
        assert field.popcount() == 100
        assert field.to_bignat() == (1 << 100) - 1

    def test_width_must_be_positive(self):
        """Test that a zero-width field is rejected"""
        with pytest.raises(ValueError, match="width must be positive"):
            BitField(0)

    def test_bignat_conversion(self):
        """Test conversion to and from Python integers across word boundaries"""
        value = (1 << 100) | (1 << 64) | 0xF0F0
        field = BitField.from_bignat(value, 128)
        assert field.to_bignat() == value
        assert field.bit_length() == 101

    def test_from_bignat_rejects_overflow(self):
        """Test that a value wider than the field is rejected"""
        with pytest.raises(ValueError, match="does not fit"):
            BitField.from_bignat(256, 8)

    def test_hex_format(self):
        """Test the width-prefixed hex text form"""
        field = BitField.from_bignat(15, 8)
        assert field.to_hex() == "8:000000000000000f"
        assert BitField.from_hex("8:000000000000000f") == field
        with pytest.raises(ValueError, match="Missing width header"):
            BitField.from_hex("0f")

    def test_bit_access_and_positions(self):
        """Test reading single bits and listing set and clear positions"""
        field = BitField.from_bignat(0b1010, 4)
        assert field.bit(1) == 1
        assert field.bit(0) == 0
        assert field.set_bit_positions() == [1, 3]
        assert field.clear_bit_positions() == [0, 2]
        assert field.clear_bit_positions(1) == [0]
        with pytest.raises(IndexError):
            field.bit(4)

    def test_equality_and_hashing(self):
        """Test value equality including width, and that fields are unhashable"""
        assert BitField.from_bignat(3, 4) == BitField.from_bignat(3, 4)
        assert BitField.from_bignat(3, 4) != BitField.from_bignat(3, 8)
        with pytest.raises(TypeError):
            hash(BitField.zeros(4))

    def test_copy_is_independent(self):
        """Test that a copy does not share storage with the original"""
        field = BitField.zeros(64)
        duplicate = field.copy()
        duplicate.words[0] = np.uint64(1)
        assert field.to_bignat() == 0


class TestBitOperations:
    """Shifts, replication, accumulation and scanning"""

    def test_shift_into_upper_grows_width(self):
        """Test x * 2^p on a single-bit field"""
        result = shift_into_upper(BitField.from_bignat(1, 1), 1)
        assert result.width == 2
        assert result.to_bignat() == 2

    def test_shift_into_upper_across_words(self):
        """Test a whole-word shift"""
        field = BitField.from_bignat((1 << 64) - 1, 64)
        result = shift_into_upper(field, 64)
        assert result.width == 128
        assert result.to_bignat() == ((1 << 64) - 1) << 64

    def test_replicate_double(self):
        """Test x * (2^p + 1) within and across words"""
        assert replicate_double(BitField.from_bignat(1, 1), 1).to_bignat() == 3
        half = BitField.from_bignat(0xDEADBEEF, 32)
        assert replicate_double(half, 32).to_bignat() == 0xDEADBEEFDEADBEEF
        block = BitField.from_bignat(0x1234, 128)
        assert replicate_double(block, 128).to_bignat() == 0x1234 | (0x1234 << 128)

    def test_contract_violation(self):
        """Test that a set bit at or above p is reported unless checks are off"""
        field = BitField.from_bignat(4, 4)
        with pytest.raises(ContractViolation, match="not below p=2"):
            shift_into_upper(field, 2)
        with pytest.raises(ContractViolation):
            replicate_double(field, 2)
        replicate_double(field, 2, check=False)

    def test_resize(self):
        """Test zero extension and the refusal to drop set bits"""
        result = resize(BitField.from_bignat(5, 4), 8)
        assert result.width == 8
        assert result.to_bignat() == 5
        with pytest.raises(ValueError, match="drop set bits"):
            resize(BitField.from_bignat(255, 8), 4)

    def test_or_accumulate(self):
        """Test in-place OR and detection of the all-ones field"""
        acc = BitField.zeros(8)
        or_accumulate(acc, BitField.from_bignat(15, 8))
        assert not is_all_ones(acc)
        or_accumulate(acc, BitField.from_bignat(240, 8))
        assert acc.to_bignat() == 255
        assert is_all_ones(acc)
        with pytest.raises(ValueError, match="Width mismatch"):
            or_accumulate(acc, BitField.zeros(16))

    def test_counters_are_charged(self):
        """Test that operations charge bits and words to the counters"""
        counters = OpCounters()
        or_accumulate(BitField.zeros(128), BitField.ones(128), counters)
        assert counters.bit_ops == 128
        assert counters.words_touched == 2

    def test_first_unset_word(self):
        """Test the scan over full words, a clear word and a partial tail"""
        field = BitField.ones(64 * 10)
        assert first_unset_word(field) == 10
        field.words[7] = np.uint64(0)
        assert first_unset_word(field) == 7
        assert first_unset_word(field, 8) == 10

        tail = BitField.ones(100)
        assert first_unset_word(tail) == 2
        tail.words[1] &= ~np.uint64(1 << 35)
        assert first_unset_word(tail) == 1

    def test_first_unset_word_past_chunk(self):
        """Test that the scan continues beyond the first chunk"""
        field = BitField.ones(64 * (SCAN_CHUNK_WORDS + 500))
        field.words[SCAN_CHUNK_WORDS + 100] = np.uint64(0)
        assert first_unset_word(field) == SCAN_CHUNK_WORDS + 100

    def test_tile(self):
        """Test repetition of a small pattern into a larger width"""
        assert tile(BitField.from_bignat(0b10, 2), 8).to_bignat() == 0b10101010
        wide = tile(BitField.from_bignat(0b10, 2), 256)
        assert wide.popcount() == 128
        assert wide.to_bignat() == int("10" * 128, 2)
        with pytest.raises(ValueError, match="Cannot tile"):
            tile(BitField.from_bignat(1, 3), 8)

    def test_width_cap(self):
        """Test that the width cap raises a memory error subclass"""
        check_width(1 << 9, 1 << 9)
        with pytest.raises(WidthCapExceeded) as exc_info:
            check_width(1 << 10, 1 << 9)
        assert isinstance(exc_info.value, MemoryError)
        assert exc_info.value.width == 1 << 10


class TestBigIntegerEquivalence:
    """Randomized comparison of the word operations against Python integers"""

    def test_bignat_round_trip(self):
        """Test n -> field -> n for 1000 random values and widths"""
        rng = np.random.default_rng(1000)
        for _ in range(1000):
            width = int(rng.integers(1, 600))
            n = int.from_bytes(rng.bytes((width + 7) // 8), "little") >> (-width % 8)
            assert BitField.from_bignat(n, width).to_bignat() == n
            assert BitField.from_hex(BitField.from_bignat(n, width).to_hex()).to_bignat() == n

    def test_no_carry_products(self):
        """Test shift and replicate against multiplication by 2^p and 2^p + 1"""
        rng = np.random.default_rng(2025)
        for _ in range(500):
            p = 1 << int(rng.integers(0, 10))
            n = int.from_bytes(rng.bytes((p + 7) // 8), "little") % (1 << p)
            x = BitField.from_bignat(n, p)
            assert shift_into_upper(x, p).to_bignat() == n * (1 << p)
            assert replicate_double(x, p).to_bignat() == n * ((1 << p) + 1)

    def test_set_and_clear_positions_partition(self):
        """Test that set and clear positions split 0..width-1 and follow to_bignat"""
        rng = np.random.default_rng(77)
        for _ in range(200):
            width = int(rng.integers(1, 1000))
            n = int.from_bytes(rng.bytes((width + 7) // 8), "little") >> (-width % 8)
            field = BitField.from_bignat(n, width)
            set_positions = field.set_bit_positions()
            clear_positions = field.clear_bit_positions()
            assert sorted(set_positions + clear_positions) == list(range(width))
            assert set_positions == [k for k in range(width) if (n >> k) & 1]
            limit = int(rng.integers(0, width + 2))
            assert field.clear_bit_positions(limit) == clear_positions[:limit]

    def test_clear_positions_across_chunks(self):
        """Test clear positions in a field wider than one scan chunk"""
        width = 64 * (SCAN_CHUNK_WORDS + 3)
        field = BitField.ones(width)
        field.words[SCAN_CHUNK_WORDS + 1] &= ~np.uint64(1 << 9)
        field.words[2] = np.uint64(0)
        expected = list(range(128, 192)) + [64 * (SCAN_CHUNK_WORDS + 1) + 9]
        assert field.clear_bit_positions() == expected
        assert field.clear_bit_positions(65) == expected
        assert field.clear_bit_positions(3) == [128, 129, 130]

    def test_clear_positions_with_limit_stay_small(self):
        """Test that finding one clear bit allocates far less than the field"""
        field = BitField.zeros(1 << 22)
        field.words[: len(field.words) // 2] = np.uint64(0xFFFF_FFFF_FFFF_FFFF)
        tracemalloc.start()
        try:
            tracemalloc.reset_peak()
            positions = field.clear_bit_positions(1)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        assert positions == [1 << 21]
        assert peak < field.nbytes // 4
