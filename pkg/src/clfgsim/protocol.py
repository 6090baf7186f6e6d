"""Codec and register map for the four-wire serial host link.

Command words are 32 bits, most significant bit first: an 8-bit opcode,
an 8-bit register address and 16 bits of immediate data.  The register
map is a behavioural reconstruction of a minimal host interface for this
kind of control chip (see README.md); real silicon will differ.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

from .errors import SimulationError


class Opcode(IntEnum):
    NOP = 0x00
    WRITE = 0x01
    READ = 0x02
    EXEC = 0x03


class UnknownOpcode(SimulationError):
    def __init__(self, value: int) -> None:
        super().__init__(f"unknown opcode 0x{value:02x}")
        self.value = value


class UnknownAddress(SimulationError):
    def __init__(self, address: int) -> None:
        super().__init__(f"no register at address 0x{address:02x}")
        self.address = address


class ValueOutOfRange(SimulationError):
    def __init__(self, register: str, value: int, lo: int, hi: int) -> None:
        super().__init__(f"{register}={value} outside [{lo}..{hi}]")
        self.register = register
        self.value = value


class StreamFormatError(SimulationError):
    """Malformed line in a raw command-stream file."""


# Register addresses.
CTRL = 0x00            # bit0 clock-enable, bit1 fsm-enable, bit2 playback-enable
DIVIDER = 0x01         # exponent n in f_div = f_master / 2**n, 0..15
LOCK_MASK_LO = 0x02    # lock-select mask, cells 0..15
LOCK_MASK_HI = 0x03    # lock-select mask, cells 16..31
PULSE_MASK_LO = 0x04   # pulse-enable mask, cells 0..15
PULSE_MASK_HI = 0x05   # pulse-enable mask, cells 16..31
PATTERN_BASE = 0x10    # PATTERN0..PATTERN7 at 0x10..0x17
PATTERN_LEN = 0x20     # active pattern length in bits, 1..128
REFRESH_PERIOD = 0x21  # round-robin refresh period, whole seconds

CTRL_CLOCK_ENABLE = 1 << 0
CTRL_FSM_ENABLE = 1 << 1
CTRL_PLAYBACK_ENABLE = 1 << 2

N_PATTERN_WORDS = 8
PATTERN_BITS = 16 * N_PATTERN_WORDS

REGISTER_NAMES: dict[int, str] = {
    CTRL: "CTRL",
    DIVIDER: "DIVIDER",
    LOCK_MASK_LO: "LOCK_MASK_LO",
    LOCK_MASK_HI: "LOCK_MASK_HI",
    PULSE_MASK_LO: "PULSE_MASK_LO",
    PULSE_MASK_HI: "PULSE_MASK_HI",
    PATTERN_LEN: "PATTERN_LEN",
    REFRESH_PERIOD: "REFRESH_PERIOD",
}
for _i in range(N_PATTERN_WORDS):
    REGISTER_NAMES[PATTERN_BASE + _i] = f"PATTERN{_i}"

NAME_TO_ADDRESS: dict[str, int] = {name: addr for addr, name in REGISTER_NAMES.items()}


@dataclass(frozen=True)
class Frame:
    """One serial command word: opcode / address / data, packed 8/8/16."""

    opcode: int
    address: int = 0
    data: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.opcode <= 0xFF:
            raise ValueError(f"opcode {self.opcode} not an 8-bit value")
        if not 0 <= self.address <= 0xFF:
            raise ValueError(f"address {self.address} not an 8-bit value")
        if not 0 <= self.data <= 0xFFFF:
            raise ValueError(f"data {self.data} not a 16-bit value")


def encode_frame(frame: Frame) -> int:
    """Pack a frame into its 32-bit wire word (MSB first)."""
    return (frame.opcode << 24) | (frame.address << 16) | frame.data


def decode_frame(word: int) -> Frame:
    """Inverse of :func:`encode_frame`; rejects opcodes outside the command set."""
    if not 0 <= word <= 0xFFFFFFFF:
        raise ValueError(f"word 0x{word:x} wider than 32 bits")
    opcode = (word >> 24) & 0xFF
    if opcode not in (Opcode.NOP, Opcode.WRITE, Opcode.READ, Opcode.EXEC):
        raise UnknownOpcode(opcode)
    return Frame(opcode=Opcode(opcode), address=(word >> 16) & 0xFF, data=word & 0xFFFF)


@dataclass(frozen=True)
class RegisterFile:
    """Host-visible configuration registers.

    Immutable; writes go through :func:`apply_write` and return a new file,
    so a rejected write can never leave partial effects behind.
    """

    ctrl: int = 0
    divider: int = 0
    lock_mask_lo: int = 0
    lock_mask_hi: int = 0
    pulse_mask_lo: int = 0
    pulse_mask_hi: int = 0
    pattern: tuple[int, ...] = (0,) * N_PATTERN_WORDS
    pattern_len: int = 1
    refresh_period: int = 0

    @property
    def clock_enabled(self) -> bool:
        return bool(self.ctrl & CTRL_CLOCK_ENABLE)

    @property
    def fsm_enabled(self) -> bool:
        return bool(self.ctrl & CTRL_FSM_ENABLE)

    @property
    def playback_enabled(self) -> bool:
        return bool(self.ctrl & CTRL_PLAYBACK_ENABLE)

    @property
    def lock_mask(self) -> int:
        return (self.lock_mask_hi << 16) | self.lock_mask_lo

    @property
    def pulse_mask(self) -> int:
        return (self.pulse_mask_hi << 16) | self.pulse_mask_lo

    @property
    def pattern_int(self) -> int:
        """128-bit pattern; PATTERN0 supplies bits 127..112."""
        value = 0
        for word in self.pattern:
            value = (value << 16) | word
        return value

    def pattern_bit(self, cursor: int) -> int:
        """Pattern bit at playback position `cursor`; bit 127 plays first."""
        if not 0 <= cursor < PATTERN_BITS:
            raise ValueError(f"cursor {cursor} outside 0..{PATTERN_BITS - 1}")
        return (self.pattern_int >> (PATTERN_BITS - 1 - cursor)) & 1

    def read(self, address: int) -> int:
        if address == CTRL:
            return self.ctrl
        if address == DIVIDER:
            return self.divider
        if address == LOCK_MASK_LO:
            return self.lock_mask_lo
        if address == LOCK_MASK_HI:
            return self.lock_mask_hi
        if address == PULSE_MASK_LO:
            return self.pulse_mask_lo
        if address == PULSE_MASK_HI:
            return self.pulse_mask_hi
        if PATTERN_BASE <= address < PATTERN_BASE + N_PATTERN_WORDS:
            return self.pattern[address - PATTERN_BASE]
        if address == PATTERN_LEN:
            return self.pattern_len
        if address == REFRESH_PERIOD:
            return self.refresh_period
        raise UnknownAddress(address)


def _check_range(register: str, value: int, lo: int, hi: int) -> None:
    if not lo <= value <= hi:
        raise ValueOutOfRange(register, value, lo, hi)


def apply_write(regs: RegisterFile, address: int, data: int) -> RegisterFile:
    """Write one register, returning the updated file.

    Unknown addresses and out-of-range values are rejected before any state
    changes; the input register file is never touched.
    """
    _check_range("data", data, 0, 0xFFFF)
    if address == CTRL:
        _check_range("CTRL", data, 0, 0b111)
        return replace(regs, ctrl=data)
    if address == DIVIDER:
        _check_range("DIVIDER", data, 0, 15)
        return replace(regs, divider=data)
    if address == LOCK_MASK_LO:
        return replace(regs, lock_mask_lo=data)
    if address == LOCK_MASK_HI:
        return replace(regs, lock_mask_hi=data)
    if address == PULSE_MASK_LO:
        return replace(regs, pulse_mask_lo=data)
    if address == PULSE_MASK_HI:
        return replace(regs, pulse_mask_hi=data)
    if PATTERN_BASE <= address < PATTERN_BASE + N_PATTERN_WORDS:
        words = list(regs.pattern)
        words[address - PATTERN_BASE] = data
        return replace(regs, pattern=tuple(words))
    if address == PATTERN_LEN:
        _check_range("PATTERN_LEN", data, 1, PATTERN_BITS)
        return replace(regs, pattern_len=data)
    if address == REFRESH_PERIOD:
        return replace(regs, refresh_period=data)
    raise UnknownAddress(address)


def parse_stream(text: str) -> list[int]:
    """Parse a raw command-stream file into 32-bit words.

    One 8-hex-digit word per line; `#` starts a comment; blank lines are
    skipped.  This is the ingestion format for the CLI `replay` mode.
    """
    words: list[int] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        token = line[2:] if line.lower().startswith("0x") else line
        if len(token) != 8:
            raise StreamFormatError(f"line {lineno}: expected 8 hex digits, got {line!r}")
        try:
            words.append(int(token, 16))
        except ValueError as exc:
            raise StreamFormatError(f"line {lineno}: not hexadecimal: {line!r}") from exc
    return words
