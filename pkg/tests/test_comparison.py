"""Comparison levels and table construction."""

import numpy as np
import pytest

from bayeslink.comparison import (
    FieldSpec,
    RecordFile,
    build_comparison_table,
    date_ymd_level,
    digit_prefix_level,
    exact_agreement_level,
    load_record_file,
)
from bayeslink.errors import ConfigError, DataError


class TestLevelFunctions:
    def test_exact(self):
        assert exact_agreement_level("F", "F") == 2
        assert exact_agreement_level("F", "M") == 1
        assert exact_agreement_level(3, 3) == 2

    def test_digit_prefix(self):
        assert digit_prefix_level("123", "123", 3) == 4
        assert digit_prefix_level("123", "124", 3) == 3
        assert digit_prefix_level("123", "193", 3) == 2
        assert digit_prefix_level("123", "923", 3) == 1

    def test_digit_prefix_rejects_short_or_nondigit(self):
        with pytest.raises(DataError):
            digit_prefix_level("12", "123", 3)
        with pytest.raises(DataError):
            digit_prefix_level("12a", "123", 3)

    def test_date_levels(self):
        assert date_ymd_level("1960-04-17", "1960-04-17") == 4
        assert date_ymd_level("1960-04-17", "1960-04-18") == 3
        assert date_ymd_level("1960-04-17", "1960-05-17") == 2
        assert date_ymd_level("1960-04-17", "1961-04-17") == 1
        # day agreement without month agreement is still level 2
        assert date_ymd_level("1960-04-17", "1960-05-17") == 2

    def test_date_rejects_malformed(self):
        with pytest.raises(DataError):
            date_ymd_level("1960/04/17", "1960-04-17")
        with pytest.raises(DataError):
            date_ymd_level("1960-02-30", "1960-04-17")


class TestFieldSpec:
    def test_levels(self):
        assert FieldSpec("g", "exact-categorical").levels == 2
        assert FieldSpec("z", "digit-prefix", digits=3).levels == 4
        assert FieldSpec("d", "date-ymd").levels == 4

    def test_rejects_bad_kind(self):
        with pytest.raises(ConfigError):
            FieldSpec("g", "fuzzy")

    def test_digit_prefix_needs_digits(self):
        with pytest.raises(ConfigError):
            FieldSpec("z", "digit-prefix")
        with pytest.raises(ConfigError):
            FieldSpec("g", "exact-categorical", digits=2)


def make_files():
    a = RecordFile(
        ids=np.array(["a1", "a2", "a3"]),
        fields={
            "gender": np.array(["F", "M", "F"], dtype=object),
            "zip": np.array(["123", "401", "222"], dtype=object),
            "dob": np.array(["1960-04-17", "1955-01-02", "1970-12-31"], dtype=object),
        },
        name="A",
    )
    b = RecordFile(
        ids=np.array(["b1", "b2", "b3", "b4"]),
        fields={
            "gender": np.array(["F", "F", "M", "M"], dtype=object),
            "zip": np.array(["123", "129", "401", "900"], dtype=object),
            "dob": np.array(
                ["1960-04-17", "1960-04-20", "1955-06-02", "1980-01-01"], dtype=object
            ),
        },
        name="B",
    )
    specs = [
        FieldSpec("gender", "exact-categorical"),
        FieldSpec("zip", "digit-prefix", digits=3),
        FieldSpec("dob", "date-ymd"),
    ]
    return a, b, specs


def scalar_levels(a, b, specs, i, j):
    out = []
    for s in specs:
        va = a.fields[s.name][i]
        vb = b.fields[s.name][j]
        if s.kind == "exact-categorical":
            out.append(exact_agreement_level(va, vb))
        elif s.kind == "digit-prefix":
            out.append(digit_prefix_level(va, vb, s.digits))
        else:
            out.append(date_ymd_level(va, vb))
    return out


class TestBuildTable:
    def test_matches_scalar_functions_on_every_pair(self):
        a, b, specs = make_files()
        table = build_comparison_table(a, b, specs)
        assert table.n_pairs == a.n * b.n
        for i in range(a.n):
            for j in range(b.n):
                expected = scalar_levels(a, b, specs, i, j)
                got = list(table.levels_of(i, j))
                assert got == expected, (i, j)

    def test_total_level_counts(self):
        a, b, specs = make_files()
        table = build_comparison_table(a, b, specs)
        for k, spec in enumerate(specs):
            counts = np.zeros(spec.levels, dtype=int)
            for i in range(a.n):
                for j in range(b.n):
                    counts[scalar_levels(a, b, specs, i, j)[k] - 1] += 1
            assert np.array_equal(table.total_level_counts[k], counts)
        assert sum(table.total_level_counts[0]) == table.n_pairs

    def test_missing_scored_as_disagreement(self):
        a, b, specs = make_files()
        a.fields["zip"][0] = ""
        table = build_comparison_table(a, b, specs)
        for j in range(b.n):
            assert table.levels_of(0, j)[1] == 1
        assert table.missing_comparisons == b.n

    def test_blocking_materializes_shared_keys_only(self):
        a, b, specs = make_files()
        a.block = np.array(["u", "u", "v"], dtype=object)
        b.block = np.array(["u", "w", "w", "u"], dtype=object)
        a = RecordFile(ids=a.ids, fields=a.fields, block=a.block, name="A")
        b = RecordFile(ids=b.ids, fields=b.fields, block=b.block, name="B")
        table = build_comparison_table(a, b, specs)
        # block u: 2 A records x 2 B records; v and w are unshared
        assert table.n_pairs == 4
        assert len(table.blocks) == 1
        assert table.eligible(0, 0)
        assert table.eligible(1, 3)
        assert not table.eligible(2, 1)
        assert not table.eligible(0, 2)
        assert table.block_of_a[2] == -1
        assert table.block_of_b[1] == -1
        # pattern codes agree with scalar comparison inside the block
        for i in (0, 1):
            for j in (0, 3):
                assert list(table.levels_of(i, j)) == scalar_levels(a, b, specs, i, j)

    def test_block_key_in_one_file_only_is_an_error(self):
        a, b, specs = make_files()
        a = RecordFile(ids=a.ids, fields=a.fields, block=np.array(["u", "u", "v"]), name="A")
        with pytest.raises(DataError):
            build_comparison_table(a, b, specs)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError):
            RecordFile(
                ids=np.array(["a1", "a1"]),
                fields={"gender": np.array(["F", "M"], dtype=object)},
            )

    def test_bad_digit_value_names_the_record(self):
        a, b, specs = make_files()
        a.fields["zip"][1] = "4x1"
        with pytest.raises(DataError) as err:
            build_comparison_table(a, b, specs)
        assert "a2" in str(err.value)


class TestCategoricalVocabulary:
    def test_codes_shared_across_files(self):
        # per-file relabeling would misalign these: sorted({F, M}) puts F
        # first in A while sorted({A, F}) puts F second in B
        a = RecordFile(
            ids=np.array(["a1", "a2"]),
            fields={"gender": np.array(["F", "M"], dtype=object)},
            name="A",
        )
        b = RecordFile(
            ids=np.array(["b1", "b2"]),
            fields={"gender": np.array(["A", "F"], dtype=object)},
            name="B",
        )
        table = build_comparison_table(
            a, b, [FieldSpec("gender", "exact-categorical")]
        )
        got = [[table.levels_of(i, j)[0] for j in range(2)] for i in range(2)]
        assert got == [[1, 2], [1, 1]]


def blocked_files():
    a, b, specs = make_files()
    a = RecordFile(
        ids=a.ids,
        fields=a.fields,
        block=np.array(["u", "u", "v"], dtype=object),
        name="A",
    )
    b = RecordFile(
        ids=b.ids,
        fields=b.fields,
        block=np.array(["u", "w", "w", "u"], dtype=object),
        name="B",
    )
    return a, b, specs


class TestBackgroundCounts:
    @staticmethod
    def brute_force(a, b, specs, table):
        """Level counts over non-materialized pairs, scalar comparisons."""
        out = []
        for k, spec in enumerate(specs):
            counts = np.zeros(spec.levels, dtype=int)
            for i in range(a.n):
                for j in range(b.n):
                    if table.eligible(i, j):
                        continue
                    va = str(a.fields[spec.name][i])
                    vb = str(b.fields[spec.name][j])
                    if va == "" or vb == "":
                        lv = 1
                    elif spec.kind == "exact-categorical":
                        lv = exact_agreement_level(va, vb)
                    elif spec.kind == "digit-prefix":
                        lv = digit_prefix_level(va, vb, spec.digits)
                    else:
                        lv = date_ymd_level(va, vb)
                    counts[lv - 1] += 1
            out.append(counts)
        return out

    def test_unblocked_is_all_zero(self):
        a, b, specs = make_files()
        table = build_comparison_table(a, b, specs)
        for bg in table.background_level_counts:
            assert not bg.any()

    def test_blocked_matches_brute_force(self):
        a, b, specs = blocked_files()
        table = build_comparison_table(a, b, specs)
        expected = self.brute_force(a, b, specs, table)
        ruled_out = a.n * b.n - table.n_pairs
        for k in range(len(specs)):
            assert np.array_equal(table.background_level_counts[k], expected[k])
            assert table.background_level_counts[k].sum() == ruled_out

    def test_missing_values_land_in_level_one(self):
        a, b, specs = blocked_files()
        a.fields["dob"][2] = ""  # record in the unshared block v
        b.fields["gender"][1] = ""
        table = build_comparison_table(a, b, specs)
        expected = self.brute_force(a, b, specs, table)
        for k in range(len(specs)):
            assert np.array_equal(table.background_level_counts[k], expected[k])

    def test_every_record_blocked_apart(self):
        # no shared key pairs any record of A with any of B field values
        # agree heavily, so the background holds high agreement levels
        a, b, specs = make_files()
        a = RecordFile(
            ids=a.ids, fields=a.fields, block=np.array(["u", "u", "u"]), name="A"
        )
        b = RecordFile(
            ids=b.ids,
            fields={
                "gender": a.fields["gender"][[0, 1, 2, 0]].copy(),
                "zip": a.fields["zip"][[0, 1, 2, 0]].copy(),
                "dob": a.fields["dob"][[0, 1, 2, 0]].copy(),
            },
            block=np.array(["u", "v", "v", "v"]),
            name="B",
        )
        table = build_comparison_table(a, b, specs)
        expected = self.brute_force(a, b, specs, table)
        for k in range(len(specs)):
            assert np.array_equal(table.background_level_counts[k], expected[k])
        # the three copied records sit in ruled-out pairs and agree exactly
        assert table.background_level_counts[2][-1] >= 3


class TestLoadRecordFile:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(
            "id,gender,zip,dob,y\n"
            "a1,F,123,1960-04-17,10.5\n"
            "a2,M,401,1955-01-02,9.1\n"
        )
        specs = [
            FieldSpec("gender", "exact-categorical"),
            FieldSpec("zip", "digit-prefix", digits=3),
            FieldSpec("dob", "date-ymd"),
        ]
        rec = load_record_file(str(p), specs, x_columns=["y"])
        assert rec.n == 2
        assert rec.x.shape == (2, 1)
        assert rec.x[0, 0] == 10.5
        assert rec.x_names == ("y",)

    def test_missing_column_is_reported(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("id,gender\na1,F\n")
        specs = [FieldSpec("zip", "digit-prefix", digits=3)]
        with pytest.raises(DataError) as err:
            load_record_file(str(p), specs)
        assert "zip" in str(err.value)

    def test_non_numeric_x_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("id,gender,y\na1,F,oops\n")
        specs = [FieldSpec("gender", "exact-categorical")]
        with pytest.raises(DataError):
            load_record_file(str(p), specs, x_columns=["y"])
