"""CSV parsing, schema binding, and record ordering rules."""

import pytest

from aircal.errors import IntegrityError, ParseError, SchemaError
from aircal.ingest import (
    DEFAULT_SCHEMA,
    RawTable,
    SensorRecord,
    group_by_sensor,
    parse_csv,
    table_to_csv,
    to_records,
)

CAL_HEADER = (
    "SensorID,Timestamp,OPCN3PM25,Ref.PM2.5,Longitude,Latitude,"
    "SHT31TI,SHT31TE,SHT31HI,SHT31HE"
)


def cal_csv(rows):
    return CAL_HEADER + "\n" + "\n".join(rows) + "\n"


def test_parse_minimal():
    table = parse_csv("a,b\n1,2\n")
    assert table.column_names == ("a", "b")
    assert table.rows == ((1.0, 2.0),)


def test_parse_ragged_row():
    with pytest.raises(ParseError) as err:
        parse_csv("a,b\n1,,\n")
    assert "3 cells vs 2 headers" in str(err.value)
    assert "line 2" in str(err.value)


def test_parse_duplicate_header():
    with pytest.raises(SchemaError):
        parse_csv("a,a\n1,2\n")


def test_parse_empty_cell_is_missing():
    table = parse_csv("a,b\n,5\n")
    assert table.rows == ((None, 5.0),)


def test_parse_text_cells_stay_text():
    table = parse_csv("a,b\nS001,2020-01-01T00:00:00\n")
    assert table.rows == (("S001", "2020-01-01T00:00:00"),)


def test_parse_nan_text_not_numeric():
    # Only finite decimal numbers become reals; nan/inf spellings stay text.
    table = parse_csv("a\nnan\ninf\n")
    assert table.rows == (("nan",), ("inf",))


def test_parse_empty_input():
    with pytest.raises(ParseError):
        parse_csv("")


def test_calibration_header_accepted():
    text = cal_csv(
        [
            "S000,100,10.0,12.0,10.1,50.1,21.0,18.0,45.0,55.0",
            "S000,160,11.0,12.5,10.1,50.1,21.5,18.5,46.0,56.0",
        ]
    )
    records = to_records(parse_csv(text))
    assert len(records) == 2
    assert records[0].raw_pm25 == 10.0
    assert records[0].ref_pm25 == 12.0
    assert records[0].hum_external == 55.0


def test_csv_round_trip():
    table = RawTable(
        column_names=("id", "x", "note"),
        rows=(("A", 1.5, "ok"), ("B", None, "n/a")),
    )
    assert parse_csv(table_to_csv(table)) == table


def test_to_records_sorted_by_sensor_then_time():
    rows = [
        "S001,200,1,2,10.0,50.0,20,18,40,50",
        "S000,300,1,2,10.0,50.0,20,18,40,50",
        "S000,100,1,2,10.0,50.0,20,18,40,50",
    ]
    records = to_records(parse_csv(cal_csv(rows)))
    keys = [(r.sensor_id, r.timestamp) for r in records]
    assert keys == [("S000", 100), ("S000", 300), ("S001", 200)]


def test_to_records_permutation_invariant():
    rows = [
        "S001,200,1,2,10.0,50.0,20,18,40,50",
        "S000,300,1.5,2,10.0,50.0,20,18,40,50",
        "S000,100,2.5,2,10.0,50.0,20,18,40,50",
    ]
    forward = to_records(parse_csv(cal_csv(rows)))
    backward = to_records(parse_csv(cal_csv(rows[::-1])))
    assert forward == backward


def test_to_records_duplicate_timestamp():
    rows = [
        "S000,100,1,2,10.0,50.0,20,18,40,50",
        "S000,100,1,2,10.0,50.0,20,18,40,50",
    ]
    with pytest.raises(IntegrityError):
        to_records(parse_csv(cal_csv(rows)))


def test_timestamp_formats():
    rows = [
        "S000,2020-01-01T00:00:00,1,2,10.0,50.0,20,18,40,50",
        "S000,2020-01-01T00:01:00Z,1,2,10.0,50.0,20,18,40,50",
        "S000,2020-01-01T00:02:00+00:00,1,2,10.0,50.0,20,18,40,50",
        "S000,1577836980,1,2,10.0,50.0,20,18,40,50",
    ]
    records = to_records(parse_csv(cal_csv(rows)))
    stamps = [r.timestamp for r in records]
    assert stamps == [1577836800, 1577836860, 1577836920, 1577836980]


def test_bad_timestamp():
    rows = ["S000,yesterday,1,2,10.0,50.0,20,18,40,50"]
    with pytest.raises(ParseError):
        to_records(parse_csv(cal_csv(rows)))


def test_missing_optional_channel_allowed():
    rows = ["S000,100,,2,10.0,50.0,,,,"]
    records = to_records(parse_csv(cal_csv(rows)))
    assert records[0].raw_pm25 is None
    assert records[0].temp_internal is None


def test_longitude_out_of_range():
    rows = ["S000,100,1,2,190.0,50.0,20,18,40,50"]
    with pytest.raises(IntegrityError):
        to_records(parse_csv(cal_csv(rows)))


def test_humidity_out_of_range():
    rows = ["S000,100,1,2,10.0,50.0,20,18,40,121.0"]
    with pytest.raises(IntegrityError):
        to_records(parse_csv(cal_csv(rows)))


def test_humidity_overread_tolerated():
    rows = ["S000,100,1,2,10.0,50.0,20,18,40,119.0"]
    records = to_records(parse_csv(cal_csv(rows)))
    assert records[0].hum_external == 119.0


def test_unknown_schema_field():
    with pytest.raises(SchemaError):
        to_records(parse_csv("a\n1\n"), {"altitude": "a"})


def test_schema_missing_column():
    with pytest.raises(SchemaError):
        to_records(parse_csv("a,b\n1,2\n"))


def test_custom_schema_binding():
    text = "station,when,pm,truth,lon,lat\nS1,100,9.0,11.0,10.0,50.0\n"
    schema = {
        "sensor_id": "station",
        "timestamp": "when",
        "raw_pm25": "pm",
        "ref_pm25": "truth",
        "longitude": "lon",
        "latitude": "lat",
    }
    records = to_records(parse_csv(text), schema)
    assert records[0] == SensorRecord(
        sensor_id="S1",
        timestamp=100,
        raw_pm25=9.0,
        ref_pm25=11.0,
        longitude=10.0,
        latitude=50.0,
        temp_internal=None,
        temp_external=None,
        hum_internal=None,
        hum_external=None,
    )


def test_group_by_sensor():
    rows = [
        "S001,200,1,2,10.0,50.0,20,18,40,50",
        "S000,100,1,2,10.0,50.0,20,18,40,50",
        "S000,300,1,2,10.0,50.0,20,18,40,50",
    ]
    groups = group_by_sensor(to_records(parse_csv(cal_csv(rows))))
    assert sorted(groups) == ["S000", "S001"]
    assert [r.timestamp for r in groups["S000"]] == [100, 300]


def test_default_schema_is_sensor_vocabulary():
    assert DEFAULT_SCHEMA["raw_pm25"] == "OPCN3PM25"
    assert DEFAULT_SCHEMA["ref_pm25"] == "Ref.PM2.5"
    assert DEFAULT_SCHEMA["temp_internal"] == "SHT31TI"
    assert DEFAULT_SCHEMA["hum_external"] == "SHT31HE"
