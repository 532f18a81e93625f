#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "tsc/dgp.hpp"
#include "tsc/panel.hpp"
#include "tsc/panel_csv.hpp"

using namespace tsc;
namespace fs = std::filesystem;

namespace {

PanelDataset small_panel(Index n = 3, Index t = 4, Index p = 0, Index t0 = 2) {
    PanelDataset d;
    d.outcomes.resize(n, t);
    for (Index i = 0; i < n; ++i)
        for (Index s = 0; s < t; ++s) d.outcomes(i, s) = 10.0 * i + s + 1;
    d.covariates = Eigen::MatrixXd::Constant(n, p, 0.5);
    d.t0 = t0;
    return d;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no tsc::Error thrown";
    return ErrorCode::IoError;
}

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("tsc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

void expect_same(const PanelDataset& a, const PanelDataset& b, double tol = 1e-12) {
    ASSERT_EQ(a.n_units(), b.n_units());
    ASSERT_EQ(a.n_periods(), b.n_periods());
    ASSERT_EQ(a.n_covariates(), b.n_covariates());
    EXPECT_LE((a.outcomes - b.outcomes).cwiseAbs().maxCoeff(), tol);
    if (a.n_covariates() > 0) EXPECT_LE((a.covariates - b.covariates).cwiseAbs().maxCoeff(), tol);
    EXPECT_EQ(a.treated_index, b.treated_index);
    EXPECT_EQ(a.t0, b.t0);
    EXPECT_EQ(a.unit_ids, b.unit_ids);
    EXPECT_EQ(a.time_labels, b.time_labels);
}

}  // namespace

TEST(Validate, AcceptsDefaultSimulationShape) {
    PanelDataset d = small_panel(5, 50, 12, 49);
    EXPECT_NO_THROW(validate(d));
}

TEST(Validate, RejectsPanelWithoutControls) {
    EXPECT_EQ(code_of([] { validate(small_panel(1, 4)); }), ErrorCode::NoControls);
}

TEST(Validate, RejectsNonBinaryValue) {
    PanelDataset d = small_panel(3, 4);
    d.outcomes.setZero();
    d.outcomes(1, 2) = 0.5;
    d.kind = OutcomeKind::binary();
    EXPECT_EQ(code_of([&] { validate(d); }), ErrorCode::NonBinaryValue);
}

TEST(Validate, RejectsBadT0AndShortPanels) {
    EXPECT_EQ(code_of([] { validate(small_panel(3, 4, 0, 0)); }), ErrorCode::InvalidT0);
    EXPECT_EQ(code_of([] { validate(small_panel(3, 4, 0, 4)); }), ErrorCode::InvalidT0);
    EXPECT_EQ(code_of([] { validate(small_panel(3, 1, 0, 1)); }), ErrorCode::DimensionMismatch);
}

TEST(Validate, DeclaredBoundsMustContainControls) {
    PanelDataset d = small_panel(3, 4);
    d.kind = OutcomeKind::continuous(Bounds{0.0, 5.0});
    EXPECT_EQ(code_of([&] { validate(d); }), ErrorCode::OutOfBounds);
    d.kind = OutcomeKind::continuous(Bounds{0.0, 100.0});
    EXPECT_NO_THROW(validate(d));
}

TEST(Validate, RejectsNonFinite) {
    PanelDataset d = small_panel(3, 4);
    d.outcomes(2, 1) = std::nan("");
    EXPECT_EQ(code_of([&] { validate(d); }), ErrorCode::NonFiniteInput);
}

TEST(Validate, IsIdempotent) {
    const PanelDataset once = validate(small_panel(4, 6, 2, 3));
    const PanelDataset twice = validate(once);
    expect_same(once, twice, 0.0);
}

TEST(Validate, TreatedUnitNeedNotBeFirst) {
    PanelDataset d = small_panel(4, 5);
    d.treated_index = 2;
    d = validate(d);
    EXPECT_EQ(d.control_indices(), (std::vector<Index>{0, 1, 3}));
    EXPECT_DOUBLE_EQ(d.control_outcomes(3)(2), d.outcomes(3, 3));
}

TEST(Features, PureHistoryWithoutCovariates) {
    PanelDataset d = small_panel(3, 5, 0, 3);
    d.outcomes.row(0) << 1, 2, 3, 4, 5;
    const Eigen::MatrixXd x = build_features(validate(d));
    ASSERT_EQ(x.cols(), 3);
    EXPECT_EQ(x.row(0), Eigen::RowVector3d(1, 2, 3));
}

TEST(Features, CovariatesComeFirst) {
    PanelDataset d = small_panel(3, 4, 2, 2);
    d.covariates.row(0) << 7, 8;
    d.outcomes.row(0) << 1, 2, 3, 4;
    const Eigen::MatrixXd x = build_features(validate(d));
    EXPECT_EQ(x.row(0), Eigen::RowVector4d(7, 8, 1, 2));
}

TEST(Features, LengthIsCovariatesPlusHistoryForEveryUnit) {
    dgp::Config c;
    c.seed = 3;
    const PanelDataset d = dgp::gen_panel(c, 49);
    const Eigen::MatrixXd x = build_features(d);
    EXPECT_EQ(x.rows(), d.n_units());
    EXPECT_EQ(x.cols(), 61);
    EXPECT_EQ(d.feature_length(), 61);
}

TEST(ReportingBounds, BinaryDeclaredAndControlRange) {
    PanelDataset d = validate(small_panel(3, 4));
    const Bounds r = reporting_bounds(d, 2);
    EXPECT_DOUBLE_EQ(r.lower, 13.0);
    EXPECT_DOUBLE_EQ(r.upper, 23.0);
    d.kind = OutcomeKind::continuous(Bounds{-1.0, 100.0});
    EXPECT_DOUBLE_EQ(reporting_bounds(d, 2).lower, -1.0);
    PanelDataset b = small_panel(3, 4);
    b.outcomes.setZero();
    b.kind = OutcomeKind::binary();
    b = validate(b);
    EXPECT_DOUBLE_EQ(reporting_bounds(b, 2).upper, 1.0);
}

TEST(ReportingBounds, OutsideAllowsOnlyRoundoff) {
    const Bounds b{0.0, 1.0};
    EXPECT_FALSE(outside(1.0 + 2.2e-16, b));
    EXPECT_TRUE(outside(1.0 + 1e-12, b));
    EXPECT_TRUE(outside(-1e-12, b));
}

// --- CSV -----------------------------------------------------------------

TEST(Csv, WideRoundTripOfSimulatedPanel) {
    dgp::Config c;
    c.kind = dgp::Kind::Hinge;
    c.seed = 11;
    const PanelDataset d = dgp::gen_panel(c, 45);
    const auto dir = temp_dir("wide_rt");
    write_panel_csv(d, dir / "p.csv", CsvSchema::Wide);
    const PanelDataset back = load_panel_csv(dir / "p.csv", CsvSchema::Wide, options_for(d));
    expect_same(d, back);
}

TEST(Csv, LongRoundTripOfSimulatedPanel) {
    dgp::Config c;
    c.kind = dgp::Kind::TimeVarying;
    c.seed = 5;
    const PanelDataset d = dgp::gen_panel(c, 90);
    const auto dir = temp_dir("long_rt");
    write_panel_csv(d, dir / "p.csv", CsvSchema::Long);
    expect_same(d, load_panel_csv(dir / "p.csv", CsvSchema::Long, options_for(d)));
}

TEST(Csv, CrossSchemaRoundTrip) {
    dgp::Config c;
    c.kind = dgp::Kind::Quadratic;
    c.seed = 8;
    c.outcome = OutcomeType::Binary;
    const PanelDataset d = dgp::gen_panel(c, 40);
    const auto dir = temp_dir("cross");
    write_panel_csv(d, dir / "wide.csv", CsvSchema::Wide);
    const PanelDataset from_wide = load_panel_csv(dir / "wide.csv", CsvSchema::Wide, options_for(d));
    write_panel_csv(from_wide, dir / "long.csv", CsvSchema::Long);
    const PanelDataset from_long = load_panel_csv(dir / "long.csv", CsvSchema::Long, options_for(d));
    expect_same(d, from_long);
    EXPECT_TRUE(from_long.kind.is_binary());
}

// A miniature turnout-shaped file: 5 states, 10 elections, treated NH from 1996.
TEST(Csv, TurnoutShapedWideFixture) {
    const auto dir = temp_dir("turnout");
    std::string text = "state,1980,1982,1984,1986,1988,1990,1992,1994,1996,1998\n";
    const char* states[] = {"CT", "ME", "NH", "VT", "MA"};
    for (int i = 0; i < 5; ++i) {
        text += states[i];
        for (int k = 0; k < 10; ++k) text += "," + std::to_string(40 + i + (k % 2 ? 0 : 12) + 0.5 * k);
        text += "\n";
    }
    write_file(dir / "turnout.csv", text);
    CsvLoadOptions opt;
    opt.treated = "NH";
    opt.t0 = "1996";
    const PanelDataset d = load_panel_csv(dir / "turnout.csv", CsvSchema::Wide, opt);
    EXPECT_EQ(d.n_units(), 5);
    EXPECT_EQ(d.n_periods(), 10);
    EXPECT_EQ(d.treated_index, 2);
    EXPECT_EQ(d.t0, 8);
    EXPECT_EQ(d.n_covariates(), 0);
    EXPECT_EQ(d.time_labels[static_cast<std::size_t>(d.t0)], "1996");
}

TEST(Csv, IntegerT0CountsPreTreatmentPeriods) {
    const auto dir = temp_dir("int_t0");
    write_file(dir / "p.csv", "unit,a,b,c,d\nx,1,2,3,4\ny,2,3,4,5\n");
    CsvLoadOptions opt;
    opt.t0 = "3";
    EXPECT_EQ(load_panel_csv(dir / "p.csv", CsvSchema::Wide, opt).t0, 3);
    opt.t0 = "zz";
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "p.csv", CsvSchema::Wide, opt); }), ErrorCode::InvalidT0);
}

TEST(Csv, LongMissingCellIsRagged) {
    const auto dir = temp_dir("ragged");
    write_file(dir / "p.csv", "unit,time,outcome\na,1,1\na,2,2\nb,1,3\n");
    CsvLoadOptions opt;
    opt.t0 = "1";
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "p.csv", CsvSchema::Long, opt); }), ErrorCode::RaggedPanel);
}

TEST(Csv, LongDuplicateAndVaryingCovariate) {
    const auto dir = temp_dir("dups");
    write_file(dir / "dup.csv", "unit,time,outcome\na,1,1\na,1,2\nb,1,3\na,2,1\nb,2,1\n");
    write_file(dir / "cov.csv", "unit,time,outcome,z_1\na,1,1,0\na,2,2,1\nb,1,3,0\nb,2,1,0\n");
    CsvLoadOptions opt;
    opt.t0 = "1";
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "dup.csv", CsvSchema::Long, opt); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "cov.csv", CsvSchema::Long, opt); }), ErrorCode::CovariateNotConstant);
}

TEST(Csv, WideMissingValueIsRaggedAndTextIsParseError) {
    const auto dir = temp_dir("wide_bad");
    write_file(dir / "na.csv", "unit,1,2,3\na,1,,3\nb,1,2,3\n");
    write_file(dir / "txt.csv", "unit,1,2,3\na,1,x,3\nb,1,2,3\n");
    CsvLoadOptions opt;
    opt.t0 = "2";
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "na.csv", CsvSchema::Wide, opt); }), ErrorCode::RaggedPanel);
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "txt.csv", CsvSchema::Wide, opt); }), ErrorCode::ParseError);
}

TEST(Csv, EmptyFileIsParseErrorAndMissingFileIsIoError) {
    const auto dir = temp_dir("empty");
    write_file(dir / "e.csv", "");
    CsvLoadOptions opt;
    opt.t0 = "1";
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "e.csv", CsvSchema::Wide, opt); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { load_panel_csv(dir / "nope.csv", CsvSchema::Wide, opt); }), ErrorCode::IoError);
}

TEST(Csv, UnwritablePathIsIoError) {
    const PanelDataset d = validate(small_panel());
    EXPECT_EQ(code_of([&] { write_panel_csv(d, "/nonexistent_dir_tsc/x/p.csv", CsvSchema::Wide); }),
              ErrorCode::IoError);
}

TEST(Csv, QuotedIdsSurviveRoundTrip) {
    PanelDataset d = small_panel(3, 4);
    d.unit_ids = {"New Hampshire, US", "say \"hi\"", "plain"};
    d = validate(d);
    const auto dir = temp_dir("quoted");
    write_panel_csv(d, dir / "p.csv", CsvSchema::Wide);
    expect_same(d, load_panel_csv(dir / "p.csv", CsvSchema::Wide, options_for(d)));
}
