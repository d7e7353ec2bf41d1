"""Packed bit fields over the assignment space.

Bit k of a field lives in word k // 64 at bit position k % 64 (little-endian bit
order). Bits at positions >= width are kept zero by every operation.
"""

from typing import TYPE_CHECKING

import numpy as np

from errors import ContractViolation, WidthCapExceeded

if TYPE_CHECKING:
    from data_models import OpCounters

WORD_BITS = 64
DEFAULT_MAX_WIDTH_BITS = 1 << 28
SCAN_CHUNK_WORDS = 4096

_ALL_ONES = np.uint64(0xFFFF_FFFF_FFFF_FFFF)


def word_count(width: int) -> int:
    return (width + WORD_BITS - 1) // WORD_BITS


def check_width(width: int, cap: int) -> None:
    if width > cap:
        raise WidthCapExceeded(width, cap)


def _tail_mask(width: int) -> np.uint64:
    remainder = width % WORD_BITS
    if remainder == 0:
        return _ALL_ONES
    return np.uint64((1 << remainder) - 1)


class BitField:
    __slots__ = ("width", "words")

    def __init__(self, width: int, words: np.ndarray | None = None) -> None:
        if width < 1:
            raise ValueError(f"BitField width must be positive, got {width}")
        n_words = word_count(width)
        if words is None:
            words = np.zeros(n_words, dtype=np.uint64)
        elif words.dtype != np.uint64 or words.shape != (n_words,):
            raise ValueError(
                f"Expected {n_words} uint64 words for width {width}, "
                f"got {words.dtype} array of shape {words.shape}"
            )
        self.width = width
        self.words = words

    @classmethod
    def zeros(cls, width: int) -> "BitField":
        return cls(width)

    @classmethod
    def ones(cls, width: int) -> "BitField":
        field = cls(width, np.full(word_count(width), _ALL_ONES, dtype=np.uint64))
        field._clear_tail()
        return field

    @classmethod
    def from_bignat(cls, n: int, width: int) -> "BitField":
        if n < 0 or n.bit_length() > width:
            raise ValueError(f"{n} does not fit in a bit field of width {width}")
        n_words = word_count(width)
        data = n.to_bytes(n_words * 8, "little")
        return cls(width, np.frombuffer(data, dtype="<u8").astype(np.uint64))

    @classmethod
    def from_hex(cls, text: str) -> "BitField":
        width_text, separator, digits = text.strip().partition(":")
        if not separator:
            raise ValueError(f"Missing width header in hex field {text[:32]!r}")
        return cls.from_bignat(int(digits, 16) if digits else 0, int(width_text))

    def to_bignat(self) -> int:
        return int.from_bytes(self.words.astype("<u8").tobytes(), "little")

    def to_hex(self) -> str:
        """Width header, then the words most significant first, 16 hex digits each."""
        return f"{self.width}:{self.to_bignat():0{len(self.words) * 16}x}"

    def copy(self) -> "BitField":
        return BitField(self.width, self.words.copy())

    @property
    def nbytes(self) -> int:
        return int(self.words.nbytes)

    def bit(self, k: int) -> int:
        if not 0 <= k < self.width:
            raise IndexError(f"Bit {k} outside width {self.width}")
        return int(self.words[k // WORD_BITS] >> np.uint64(k % WORD_BITS)) & 1

    def bit_length(self) -> int:
        nonzero = np.flatnonzero(self.words)
        if nonzero.size == 0:
            return 0
        top = int(nonzero[-1])
        return top * WORD_BITS + int(self.words[top]).bit_length()

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def _bits(self) -> np.ndarray:
        as_bytes = self.words.astype("<u8").view(np.uint8)
        return np.unpackbits(as_bytes, bitorder="little")[: self.width]

    def set_bit_positions(self) -> list[int]:
        return np.flatnonzero(self._bits()).tolist()

    def clear_bit_positions(self, limit: int | None = None) -> list[int]:
        """Ascending clear positions, unpacking only words that hold one.

        Words are scanned in chunks and the scan stops once limit positions are found.
        """
        remaining = self.width if limit is None else limit
        found: list[np.ndarray] = []
        for start in range(0, len(self.words), SCAN_CHUNK_WORDS):
            if remaining <= 0:
                break
            chunk = self.words[start : start + SCAN_CHUNK_WORDS]
            # every open word below the tail holds at least one clear bit
            open_words = np.flatnonzero(chunk != _ALL_ONES)[: remaining + 1]
            if open_words.size == 0:
                continue
            inverted = ~chunk[open_words]
            bits = np.unpackbits(inverted.astype("<u8").view(np.uint8), bitorder="little")
            rows, columns = np.nonzero(bits.reshape(-1, WORD_BITS))
            positions = (start + open_words[rows]) * WORD_BITS + columns
            positions = positions[positions < self.width][:remaining]
            found.append(positions)
            remaining -= positions.size
        if not found:
            return []
        return np.concatenate(found).tolist()

    def _clear_tail(self) -> None:
        self.words[-1] &= _tail_mask(self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitField):
            return NotImplemented
        return self.width == other.width and bool(np.array_equal(self.words, other.words))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        if self.width <= 256:
            return f"BitField(width={self.width}, value={self.to_bignat():#x})"
        return f"BitField(width={self.width}, popcount={self.popcount()})"


def _require_below(x: BitField, p: int, operation: str, check: bool) -> None:
    if __debug__ and check and x.bit_length() > p:
        raise ContractViolation(
            f"{operation}: set bit at position {x.bit_length() - 1} is not below p={p}"
        )


def _or_shifted(src: np.ndarray, p: int, dst: np.ndarray) -> None:
    """OR src shifted left by p bits into dst; bits pushed past dst are dropped."""
    word_shift, bit_shift = divmod(p, WORD_BITS)
    take = min(len(src), len(dst) - word_shift)
    if take <= 0:
        return
    part = src[:take]
    if bit_shift == 0:
        dst[word_shift : word_shift + take] |= part
        return
    dst[word_shift : word_shift + take] |= part << np.uint64(bit_shift)
    carry = min(take, len(dst) - word_shift - 1)
    if carry > 0:
        dst[word_shift + 1 : word_shift + 1 + carry] |= part[:carry] >> np.uint64(
            WORD_BITS - bit_shift
        )


def resize(x: BitField, width: int, counters: "OpCounters | None" = None) -> BitField:
    """Zero-extend (or copy) x into a field of the given width."""
    if x.bit_length() > width:
        raise ValueError(f"Resizing to width {width} would drop set bits")
    out = BitField(width)
    n = min(len(x.words), len(out.words))
    out.words[:n] = x.words[:n]
    if counters is not None:
        counters.charge(width)
    return out


def shift_into_upper(
    x: BitField, p: int, counters: "OpCounters | None" = None, check: bool = True
) -> BitField:
    """x * 2^p, growing the width to 2p when needed."""
    if p < 1:
        raise ValueError(f"Shift distance must be positive, got {p}")
    _require_below(x, p, "shift_into_upper", check)
    out = BitField(max(x.width, 2 * p))
    _or_shifted(x.words, p, out.words)
    out._clear_tail()
    if counters is not None:
        counters.charge(out.width)
    return out


def replicate_double(
    x: BitField, p: int, counters: "OpCounters | None" = None, check: bool = True
) -> BitField:
    """x * (2^p + 1), which is x OR (x << p) when every set bit of x is below p."""
    if p < 1:
        raise ValueError(f"Shift distance must be positive, got {p}")
    _require_below(x, p, "replicate_double", check)
    out = BitField(max(x.width, 2 * p))
    out.words[: len(x.words)] = x.words
    _or_shifted(x.words, p, out.words)
    out._clear_tail()
    if counters is not None:
        counters.charge(out.width)
    return out


def or_accumulate(
    acc: BitField, m: BitField, counters: "OpCounters | None" = None
) -> BitField:
    """OR m into acc in place and return acc."""
    if acc.width != m.width:
        raise ValueError(f"Width mismatch: {acc.width} != {m.width}")
    np.bitwise_or(acc.words, m.words, out=acc.words)
    if counters is not None:
        counters.charge(acc.width)
    return acc


def first_unset_word(
    x: BitField, start: int = 0, counters: "OpCounters | None" = None
) -> int:
    """Index of the first word at or after start that is not all ones.

    Returns len(x.words) when the field from start on is all ones. Scanning stops
    at the first chunk holding a clear bit, so a caller that resumes from the
    returned index over a monotonically growing field pays O(width) in total.
    """
    words = x.words
    n_words = len(words)
    body_end = n_words - 1
    index = start
    while index < body_end:
        end = min(index + SCAN_CHUNK_WORDS, body_end)
        clear = np.flatnonzero(words[index:end] != _ALL_ONES)
        if counters is not None:
            counters.charge((end - index) * WORD_BITS)
        if clear.size:
            return index + int(clear[0])
        index = end
    if index <= body_end:
        if counters is not None:
            counters.charge(WORD_BITS)
        if words[body_end] != _tail_mask(x.width):
            return body_end
    return n_words


def is_all_ones(x: BitField) -> bool:
    return first_unset_word(x) == len(x.words)


def clear_bit_positions(x: BitField, limit: int | None = None) -> list[int]:
    return x.clear_bit_positions(limit)


def to_bignat(x: BitField) -> int:
    return x.to_bignat()


def from_bignat(n: int, width: int) -> BitField:
    return BitField.from_bignat(n, width)


def tile(x: BitField, width: int, counters: "OpCounters | None" = None) -> BitField:
    """Repeat a power-of-two-width field until it fills the given power-of-two width.

    Equivalent to replicate_double(x, p) for p = x.width, 2 * x.width, ... up to
    width / 2.
    """
    if width < x.width or width & (width - 1) or x.width & (x.width - 1):
        raise ValueError(f"Cannot tile width {x.width} into width {width}")
    field = x
    while field.width < min(width, WORD_BITS):
        field = replicate_double(field, field.width, counters, check=False)
    if field.width == width:
        return field
    out = BitField(width, np.tile(field.words, width // field.width))
    if counters is not None:
        counters.charge(width)
    return out
