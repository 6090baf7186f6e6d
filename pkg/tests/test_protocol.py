import pytest
from hypothesis import given
from hypothesis import strategies as st

from clfgsim import protocol
from clfgsim.protocol import (
    Frame,
    Opcode,
    RegisterFile,
    StreamFormatError,
    UnknownAddress,
    UnknownOpcode,
    ValueOutOfRange,
    apply_write,
    decode_frame,
    encode_frame,
    parse_stream,
)

valid_frames = st.builds(
    Frame,
    opcode=st.sampled_from([Opcode.NOP, Opcode.WRITE, Opcode.READ, Opcode.EXEC]),
    address=st.integers(0, 0xFF),
    data=st.integers(0, 0xFFFF),
)


class TestCodec:
    def test_all_zero_nop(self):
        assert encode_frame(Frame(0, 0, 0)) == 0x00000000
        assert decode_frame(0x00000000) == Frame(Opcode.NOP, 0, 0)

    def test_encode_bit_layout(self):
        assert encode_frame(Frame(1, 0x01, 8)) == 0x01010008

    def test_decode_write(self):
        frame = decode_frame(0x01100ABC)
        assert frame.opcode == Opcode.WRITE
        assert frame.address == 0x10
        assert frame.data == 0x0ABC

    def test_unknown_opcode(self):
        with pytest.raises(UnknownOpcode):
            decode_frame(0xFF000000)

    def test_word_too_wide(self):
        with pytest.raises(ValueError):
            decode_frame(1 << 32)

    @given(valid_frames)
    def test_round_trip(self, frame):
        assert decode_frame(encode_frame(frame)) == frame

    @given(st.integers(4, 0xFF), st.integers(0, 0xFFFFFF))
    def test_out_of_set_opcodes_rejected(self, opcode, rest):
        with pytest.raises(UnknownOpcode):
            decode_frame((opcode << 24) | rest)

    def test_field_range_validation(self):
        with pytest.raises(ValueError):
            Frame(256, 0, 0)
        with pytest.raises(ValueError):
            Frame(0, 0, 0x10000)


class TestRegisterFile:
    def test_read_after_write(self):
        regs = apply_write(RegisterFile(), protocol.DIVIDER, 8)
        assert regs.read(protocol.DIVIDER) == 8
        assert regs.divider == 8

    def test_pattern_bit_order(self):
        # PATTERN0 holds bits 127..112 and bit 127 plays first, so filling
        # every word with 0xAAAA makes the played bits alternate 1010...
        regs = RegisterFile()
        for i in range(protocol.N_PATTERN_WORDS):
            regs = apply_write(regs, protocol.PATTERN_BASE + i, 0xAAAA)
        bits = [regs.pattern_bit(c) for c in range(protocol.PATTERN_BITS)]
        assert bits == [1, 0] * 64

    def test_pattern_len_bounds(self):
        with pytest.raises(ValueOutOfRange):
            apply_write(RegisterFile(), protocol.PATTERN_LEN, 0)
        with pytest.raises(ValueOutOfRange):
            apply_write(RegisterFile(), protocol.PATTERN_LEN, 129)
        regs = apply_write(RegisterFile(), protocol.PATTERN_LEN, 128)
        assert regs.pattern_len == 128

    def test_divider_four_bits(self):
        with pytest.raises(ValueOutOfRange):
            apply_write(RegisterFile(), protocol.DIVIDER, 16)

    def test_unknown_address_rejected(self):
        with pytest.raises(UnknownAddress):
            apply_write(RegisterFile(), 0x99, 1)
        with pytest.raises(UnknownAddress):
            RegisterFile().read(0x99)

    def test_masks_combine(self):
        regs = apply_write(RegisterFile(), protocol.LOCK_MASK_LO, 0xBEEF)
        regs = apply_write(regs, protocol.LOCK_MASK_HI, 0xDEAD)
        assert regs.lock_mask == 0xDEADBEEF

    @given(st.integers(0, 0xFFFF))
    def test_write_idempotent(self, data):
        once = apply_write(RegisterFile(), protocol.PULSE_MASK_LO, data)
        twice = apply_write(once, protocol.PULSE_MASK_LO, data)
        assert once == twice

    def test_rejected_write_leaves_state_unchanged(self):
        regs = apply_write(RegisterFile(), protocol.DIVIDER, 3)
        before = regs
        with pytest.raises(UnknownAddress):
            apply_write(regs, 0x99, 1)
        with pytest.raises(ValueOutOfRange):
            apply_write(regs, protocol.PATTERN_LEN, 0)
        assert regs == before


class TestStreamParsing:
    def test_parse_with_comments(self):
        text = """
        # configure then trigger
        01000007
        0101000F  # divider
        0x03000000
        """
        assert parse_stream(text) == [0x01000007, 0x0101000F, 0x03000000]

    def test_bad_width(self):
        with pytest.raises(StreamFormatError, match="line 1"):
            parse_stream("0100007")

    def test_not_hex(self):
        with pytest.raises(StreamFormatError):
            parse_stream("01zz0007")

    @given(st.lists(valid_frames, max_size=20))
    def test_stream_round_trip(self, frames):
        text = "\n".join(f"{encode_frame(f):08X}" for f in frames)
        assert parse_stream(text) == [encode_frame(f) for f in frames]
