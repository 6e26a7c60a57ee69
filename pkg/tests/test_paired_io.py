import math

import numpy as np
import pytest

from bivariate_pgw.errors import DomainError, InputError
from bivariate_pgw.models_schema import ColumnMap, CovariateColumn
from bivariate_pgw.paired_io import (
    RETINOPATHY_COLUMNS,
    PairedData,
    PairedRecord,
    load_paired_csv,
    long_from_wide,
    wide_frame,
)

RETINOPATHY_HEAD = """id,laser,eye,age,type,trt,futime,status,risk
5,argon,left,28,adult,1,46.23,0,9
5,argon,left,28,adult,0,46.23,0,9
14,xenon,right,12,juvenile,1,42.5,0,8
14,xenon,right,12,juvenile,0,31.3,1,6
16,xenon,right,9,juvenile,1,42.27,0,11
16,xenon,right,9,juvenile,0,42.27,0,11
"""


class TestLoadWide:
    @staticmethod
    def _write(tmp_path, text: str):
        path = tmp_path / "pairs.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_reads_records_and_covariates(self, tmp_path):
        path = self._write(tmp_path, "id,t1,d1,t2,d2,D\na,1.5,1,2.0,0,1\nb,0.3,0,0.4,1,0\n")

        records = load_paired_csv(path)

        assert records == [
            PairedRecord(id="a", t1=1.5, d1=1, t2=2.0, d2=0, covariates={"D": 1.0}),
            PairedRecord(id="b", t1=0.3, d1=0, t2=0.4, d2=1, covariates={"D": 0.0}),
        ]

    def test_explicit_covariate_list_drops_other_columns(self, tmp_path):
        path = self._write(tmp_path, "id,t1,d1,t2,d2,D,note\na,1,1,2,0,1,free text\n")
        column_map = ColumnMap(covariates=[CovariateColumn(source="D", name="D")])

        assert load_paired_csv(path, column_map=column_map)[0].covariates == {"D": 1.0}

    @pytest.mark.parametrize(
        "text, line",
        [
            pytest.param("id,t1,d1,t2,d2\na,1,1,2,0\nb,x,1,2,0\n", 3, id="non_numeric_time"),
            pytest.param("id,t1,d1,t2,d2\na,1,2,2,0\n", 2, id="bad_flag"),
            pytest.param("id,t1,d1,t2,d2\na,1,1,2,0\na,1,1,2,0\n", 3, id="duplicate_id"),
            pytest.param("id,t1,d1,t2,d2\na,0,1,2,0\n", 2, id="zero_time"),
            pytest.param("id,t1,d1,t2\na,1,1,2\n", 1, id="missing_column"),
        ],
    )
    def test_errors_carry_line_numbers(self, tmp_path, text, line):
        with pytest.raises(InputError) as info:
            load_paired_csv(self._write(tmp_path, text))

        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}:")

    @pytest.mark.parametrize("text", [pytest.param("", id="empty_file"), pytest.param("id,t1,d1,t2,d2\n", id="header_only")])
    def test_no_records(self, tmp_path, text):
        assert load_paired_csv(self._write(tmp_path, text)) == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_paired_csv(tmp_path / "absent.csv")

    def test_unknown_layout(self, tmp_path):
        with pytest.raises(InputError):
            load_paired_csv(self._write(tmp_path, "id,t1,d1,t2,d2\na,1,1,2,0\n"), layout="tall")


class TestLoadLong:
    @staticmethod
    def _write(tmp_path, text: str):
        path = tmp_path / "long.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_retinopathy_layout(self, tmp_path):
        records = load_paired_csv(self._write(tmp_path, RETINOPATHY_HEAD), layout="long", column_map=RETINOPATHY_COLUMNS)

        assert [r.id for r in records] == ["5", "14", "16"]
        second = records[1]
        # trt = 1 is member 1 (treated eye)
        assert (second.t1, second.d1, second.t2, second.d2) == (42.5, 0, 31.3, 1)
        assert second.covariates == {"D": 0.0}
        assert records[0].covariates == {"D": 1.0}

    def test_member_order_in_file_does_not_matter(self, tmp_path):
        text = "id,role,time,status\na,2,3.0,1\na,1,1.0,0\n"

        record = load_paired_csv(self._write(tmp_path, text), layout="long")[0]

        assert (record.t1, record.d1, record.t2, record.d2) == (1.0, 0, 3.0, 1)

    def test_missing_member(self, tmp_path):
        with pytest.raises(InputError, match="missing a member"):
            load_paired_csv(self._write(tmp_path, "id,role,time,status\na,1,1,1\na,2,2,0\nb,1,1,0\n"), layout="long")

    def test_duplicate_member(self, tmp_path):
        with pytest.raises(InputError) as info:
            load_paired_csv(self._write(tmp_path, "id,role,time,status\na,1,1,1\na,1,2,0\n"), layout="long")

        assert info.value.line == 3

    def test_unknown_role(self, tmp_path):
        with pytest.raises(InputError, match="unknown role"):
            load_paired_csv(self._write(tmp_path, "id,role,time,status\na,3,1,1\n"), layout="long")

    def test_unknown_covariate_level(self, tmp_path):
        text = RETINOPATHY_HEAD.replace("juvenile", "child", 1)

        with pytest.raises(InputError, match="unknown level"):
            load_paired_csv(self._write(tmp_path, text), layout="long", column_map=RETINOPATHY_COLUMNS)

    def test_covariate_must_agree_between_members(self, tmp_path):
        text = "id,role,time,status,age\na,1,1,1,30\na,2,2,0,31\n"

        with pytest.raises(InputError, match="differs between members"):
            load_paired_csv(self._write(tmp_path, text), layout="long")


class TestPairedData:
    def test_columns(self):
        data = PairedData.from_records(
            [
                PairedRecord(id="a", t1=1.0, d1=1, t2=2.0, d2=0, covariates={"D": 1.0}),
                PairedRecord(id="b", t1=3.0, d1=0, t2=4.0, d2=1, covariates={"D": 0.0}),
            ]
        )

        assert len(data) == 2
        np.testing.assert_array_equal(data.t2, [2.0, 4.0])
        np.testing.assert_array_equal(data.covariates["D"], [1.0, 0.0])
        assert data.to_records()[1].id == "b"

    def test_rescaled(self):
        data = PairedData.from_records([PairedRecord(id="a", t1=1.0, d1=1, t2=2.0, d2=0)])

        np.testing.assert_array_equal(data.rescaled(12.0).t2, [24.0])

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            PairedData.from_records([])

    def test_rejects_mismatched_covariates(self):
        with pytest.raises(DomainError):
            PairedData.from_records(
                [
                    PairedRecord(id="a", t1=1.0, d1=1, t2=2.0, d2=0, covariates={"D": 1.0}),
                    PairedRecord(id="b", t1=1.0, d1=1, t2=2.0, d2=0),
                ]
            )

    @pytest.mark.parametrize(
        "kwargs",
        [
            pytest.param({"t1": -1.0}, id="negative_time"),
            pytest.param({"t2": math.inf}, id="infinite_time"),
            pytest.param({"d1": 2}, id="bad_flag"),
            pytest.param({"covariates": {"D": math.nan}}, id="nan_covariate"),
        ],
    )
    def test_record_validation(self, kwargs):
        with pytest.raises(DomainError):
            PairedRecord(**{"id": "a", "t1": 1.0, "d1": 1, "t2": 2.0, "d2": 0, **kwargs})


class TestFrames:
    def test_wide_and_long_shapes(self):
        records = [
            PairedRecord(id="a", t1=1.0, d1=1, t2=2.0, d2=0, covariates={"D": 1.0}),
            PairedRecord(id="b", t1=3.0, d1=0, t2=4.0, d2=1, covariates={"D": 0.0}),
        ]

        wide = wide_frame(records)
        long = long_from_wide(records)

        assert list(wide.columns) == ["id", "t1", "d1", "t2", "d2", "D"]
        assert list(long.columns) == ["id", "role", "time", "status", "D"]
        assert len(long) == 4
        assert long.loc[long["id"] == "b", "time"].tolist() == [3.0, 4.0]

    def test_long_round_trip_through_csv(self, tmp_path):
        records = [PairedRecord(id="a", t1=1.25, d1=1, t2=2.5, d2=0, covariates={"D": 1.0})]
        path = tmp_path / "long.csv"
        long_from_wide(records).to_csv(path, index=False)

        assert load_paired_csv(path, layout="long") == records
