#include <sstream>

#include <gtest/gtest.h>

#include "ipf/ensemble_io.hpp"

using namespace ipf;

namespace {

TrajectoryEnsemble sample() {
    Matrix A(2, 2);
    A << -1, 0.4, 0.1, -0.7;
    auto sys = SdeSystem::linear(A, 0.3 * Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2), 0.0, 1.0);
    return simulate_ensemble(sys, TimeGrid::make(0.0, 1.0, 0.05), ControlSchedule::off(2), 7, 123);
}

}  // namespace

TEST(EnsembleCsv, RoundTripsStatesExactly) {
    const auto ens = sample();
    std::stringstream ss;
    io::write_ensemble_csv(ss, ens);
    const auto back = io::read_ensemble_csv(ss, ens.master_seed());
    ASSERT_EQ(back.paths(), ens.paths());
    ASSERT_EQ(back.recorded_nodes(), ens.recorded_nodes());
    EXPECT_EQ(back.raw_states(), ens.raw_states());
    EXPECT_NEAR(back.time(3), ens.time(3), 1e-15);
}

TEST(EnsembleCsv, HeaderIsColumnar) {
    std::stringstream ss;
    io::write_ensemble_csv(ss, sample());
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "t,path_id,x1,x2");
}

TEST(EnsembleCsv, RejectsMalformedInput) {
    std::stringstream bad_header("time,path,x\n");
    EXPECT_THROW(io::read_ensemble_csv(bad_header), ConfigError);
    std::stringstream bad_row("t,path_id,x1\n0,0,1,2\n");
    EXPECT_THROW(io::read_ensemble_csv(bad_row), ConfigError);
}

TEST(EnsembleBinary, RoundTripsWithSeedRecord) {
    const auto ens = sample();
    std::stringstream ss;
    io::write_ensemble_binary(ss, ens);
    const auto back = io::read_ensemble_binary(ss);
    EXPECT_EQ(back.master_seed(), 123u);
    EXPECT_EQ(back.raw_states(), ens.raw_states());
    EXPECT_EQ(back.dimension(), 2);
}

TEST(EnsembleBinary, RejectsWrongMagicAndTruncation) {
    std::stringstream junk("not an ensemble");
    EXPECT_THROW(io::read_ensemble_binary(junk), ConfigError);
    std::stringstream ss;
    io::write_ensemble_binary(ss, sample());
    std::string data = ss.str();
    data.resize(data.size() / 2);
    std::stringstream cut(data);
    EXPECT_THROW(io::read_ensemble_binary(cut), ConfigError);
}
