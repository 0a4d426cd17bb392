#include "pedmr/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pedmr;

namespace {

KeyValues kv_of(const std::string& text)
{
    std::istringstream in(text);
    return KeyValues::parse(in, "test.cfg");
}

std::string error_of(const std::string& text)
{
    try {
        run_config_from(kv_of(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch_dir()
{
    auto dir = std::filesystem::temp_directory_path() / "pedmr_test_config";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(Config, ParsesCommentsBomAndWhitespace)
{
    const auto kv = kv_of("\xEF\xBB\xBF# header\n\n  r_s = 1e6   # trailing\r\nthreads=2\n");
    ASSERT_EQ(kv.entries.size(), 2u);
    EXPECT_EQ(kv.entries[0].first, "r_s");
    EXPECT_EQ(kv.entries[0].second, "1e6");
    EXPECT_EQ(kv.entries[1].second, "2");
    const auto c = run_config_from(kv);
    EXPECT_EQ(c.pair.r_s, 1e6);
    EXPECT_EQ(c.threads, 2u);
}

TEST(Config, DuplicateKeyNamesBothLines)
{
    try {
        kv_of("r_s = 1\n# x\nr_s = 2\n");
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("test.cfg:3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
    }
}

TEST(Config, MalformedLinesAreRejected)
{
    EXPECT_THROW(kv_of("r_s 1\n"), ConfigError);
    EXPECT_THROW(kv_of(" = 1\n"), ConfigError);
    EXPECT_NE(error_of("nonsense = 1\n").find("nonsense"), std::string::npos);
    EXPECT_FALSE(error_of("r_s = fast\n").empty());
    EXPECT_FALSE(error_of("r_s = inf\n").empty());
    EXPECT_FALSE(error_of("points = 3.5\n").empty());
    EXPECT_FALSE(error_of("threads = 0\n").empty());
    EXPECT_FALSE(error_of("quadrature = simpson\n").empty());
    EXPECT_FALSE(error_of("fit.model = linear\n").empty());
    EXPECT_FALSE(error_of("fit.weighted = maybe\n").empty());
    EXPECT_FALSE(error_of("echo_map.tau2_from_s = 1e-6\necho_map.tau2_to_s = 0\n").empty());
    EXPECT_FALSE(error_of("echo_decay.reference_offset_s = 1e-6\n").empty());
}

TEST(Config, DefaultsAreValid)
{
    const auto c = run_config_from(KeyValues{});
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.model.lines.size(), 4u);
    EXPECT_EQ(c.quad.scheme, QuadratureSpec::Scheme::Grid);
    EXPECT_FALSE(c.far_points_explicit);
    EXPECT_EQ(c.quadrature_for(8).far_points, 8);
    EXPECT_EQ(c.quadrature_for(0).far_points, 0);
}

TEST(Config, ExplicitFarPointsOverridesExperimentDefault)
{
    const auto c = run_config_from(kv_of("far_points = 4\n"));
    EXPECT_TRUE(c.far_points_explicit);
    EXPECT_EQ(c.quadrature_for(8).far_points, 4);
    EXPECT_EQ(c.quadrature_for(0).far_points, 4);
}

TEST(Config, InlineSpectralLinesReplaceStandardModel)
{
    const auto c = run_config_from(kv_of("line1.species = P-hyperfine-high\nline1.g = 1.9985\nline1.offset_t = 2.1e-3\n"
                                         "line1.fwhm_t = 0.4e-3\nline1.weight = 1\n"
                                         "line2.species = Pb0-1\nline2.g = 2.0055\nline2.fwhm_t = 0.6e-3\n"
                                         "line2.weight = 1\n"));
    ASSERT_EQ(c.model.lines.size(), 2u);
    EXPECT_EQ(c.model.lines[0].g_center, 1.9985);
    EXPECT_EQ(c.model.lines[0].field_offset, 2.1e-3);
    EXPECT_EQ(c.model.lines[1].field_offset, 0.0);
}

TEST(Config, IncompleteSpectralLineIsRejected)
{
    EXPECT_FALSE(error_of("line1.species = P-hyperfine-high\nline1.g = 1.9985\n").empty());
    EXPECT_FALSE(error_of("line1.colour = red\n").empty());
    EXPECT_FALSE(error_of("line0.g = 2\n").empty());
    EXPECT_FALSE(error_of("line1.species = Xx\n").empty());
}

TEST(Config, SpectralModelFileIsResolvedRelativeToConfig)
{
    const auto dir = scratch_dir();
    {
        std::ofstream m(dir / "model.txt");
        m << "f_mw_hz = 9.7e9\nline1.species = P-hyperfine-high\nline1.g = 1.9985\nline1.fwhm_t = 0.4e-3\nline1.weight = 1\n"
             "line2.species = Pb0-1\nline2.g = 2.0055\nline2.fwhm_t = 0.6e-3\nline2.weight = 1\n";
        std::ofstream cfg(dir / "run.cfg");
        cfg << "spectral_model = model.txt\nb1_t = 1e-3\n";
    }
    const auto c = load_run_config(dir / "run.cfg");
    EXPECT_EQ(c.model.f_mw, 9.7e9);
    EXPECT_EQ(c.model.b1, 1e-3);
    EXPECT_EQ(c.model.lines.size(), 2u);
    EXPECT_THROW(load_run_config(dir / "missing.cfg"), ConfigError);
}

TEST(Config, SpectralModelRejectsRunKeys)
{
    EXPECT_THROW(spectral_model_from(kv_of("r_s = 1\n")), ConfigError);
    const auto m = spectral_model_from(KeyValues{});
    EXPECT_EQ(m.lines.size(), SpectralModel::standard().lines.size());
}

TEST(Config, SpectralModelTextRoundTrips)
{
    const auto m = SpectralModel::standard();
    const auto text = spectral_model_text(m);
    const auto back = spectral_model_from(kv_of(text));
    EXPECT_EQ(spectral_model_text(back), text);
    ASSERT_EQ(back.lines.size(), m.lines.size());
    for (std::size_t i = 0; i < m.lines.size(); ++i) {
        EXPECT_EQ(back.lines[i].g_center, m.lines[i].g_center);
        EXPECT_EQ(back.lines[i].fwhm, m.lines[i].fwhm);
        EXPECT_EQ(back.lines[i].weight, m.lines[i].weight);
    }
}

TEST(ConfigProperty, ResolvedTextIsAFixedPoint)
{
    for (const std::string& text : {std::string{}, std::string("far_points = 8\nr_t = 0\ngamma_phi = 1.1e6\n"),
                                   std::string("quadrature = monte-carlo\nseed = 17\npoints = 20\nfit.weighted = true\n"
                                               "echo_decay.background = none\n")}) {
        const auto c = run_config_from(kv_of(text));
        const auto once = resolved_config_text(c);
        const auto twice = resolved_config_text(run_config_from(kv_of(once)));
        EXPECT_EQ(once, twice);
    }
    const auto c = run_config_from(kv_of("quadrature = monte-carlo\nseed = 17\npoints = 20\nfit.weighted = true\n"));
    const auto again = run_config_from(kv_of(resolved_config_text(c)));
    EXPECT_EQ(again.quad.scheme, QuadratureSpec::Scheme::MonteCarlo);
    EXPECT_EQ(again.quad.seed, 17u);
    EXPECT_TRUE(again.fit.weighted);
}
