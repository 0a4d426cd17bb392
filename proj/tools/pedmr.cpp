// pedmr: batch runner for the simulated pulsed-EDMR experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 sequence parse error,
// 4 fit did not converge (data are still written), 1 anything else.

#include "pedmr/config.hpp"
#include "pedmr/experiments.hpp"
#include "pedmr/sequence.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace pedmr;

namespace {

constexpr int exit_config = 2;
constexpr int exit_parse = 3;
constexpr int exit_fit = 4;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> points;
    std::string sequence;
    std::string input;
};

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
}

RunConfig resolve(const Options& o)
{
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed) c.quad.seed = *o.seed;
    if (o.points) c.quad.points_per_spin = *o.points;
    c.validate();
    return c;
}

int emit(const ExperimentResult& r, const RunConfig& c, const Options& o)
{
    const fs::path dir = o.out.empty() ? fs::path("out") / r.name : fs::path(o.out);
    fs::create_directories(dir);
    write_file(dir / (r.name + ".csv"), r.csv());
    write_file(dir / "summary.txt", r.summary_text());
    write_file(dir / "resolved_config.txt", resolved_config_text(c));
    for (const auto& [name, content] : r.files) write_file(dir / name, content);
    std::cout << r.summary_text();
    if (r.fit) {
        write_file(dir / "fit.txt", r.fit->key_value());
        write_file(dir / "fit.csv", r.fit->csv_header() + '\n' + r.fit->csv_row() + '\n');
        if (!r.fit->converged) {
            std::cerr << "pedmr: fit did not converge; data written to " << dir.string() << '\n';
            return exit_fit;
        }
    }
    return 0;
}

std::optional<std::string> sequence_text(const Options& o)
{
    if (o.sequence.empty()) return std::nullopt;
    return read_file(o.sequence);
}

int parse_check(const Options& o)
{
    if (o.sequence.empty()) throw ConfigError("parse-check needs --sequence");
    const auto result = pseq::parse(read_file(o.sequence));
    if (!result.ok()) {
        for (const auto& d : result.diagnostics) std::cerr << o.sequence << ':' << d.format() << '\n';
        return exit_parse;
    }
    std::cout << pseq::print(result.program);
    return 0;
}

int fit(const Options& o)
{
    if (o.input.empty()) throw ConfigError("fit needs --input");
    const RunConfig c = resolve(o);
    std::ifstream in(o.input);
    if (!in) throw ConfigError("cannot open " + o.input);
    const auto series = Series::from_table(io::read_csv(in));
    const auto r = run_fit(c, series);
    std::cout << r.key_value();
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        write_file(fs::path(o.out) / "fit.txt", r.key_value());
        write_file(fs::path(o.out) / "fit.csv", r.csv_header() + '\n' + r.csv_row() + '\n');
        write_file(fs::path(o.out) / "resolved_config.txt", resolved_config_text(c));
    }
    return r.converged ? 0 : exit_fit;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pulsed EDMR spin-pair simulator"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "run configuration (key = value)")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "quadrature seed (monte-carlo)");
        sub->add_option("--points", o.points, "quadrature points per spin");
    };
    auto* rabi = app.add_subcommand("rabi", "Q versus pulse length");
    auto* map = app.add_subcommand("echo-map", "dQ over field and second free-evolution time");
    auto* decay = app.add_subcommand("echo-decay", "echo amplitude versus total free evolution, with fit");
    auto* spectrum = app.add_subcommand("spectrum", "Q under a fixed pulse versus field");
    auto* fitcmd = app.add_subcommand("fit", "fit a CSV series (x,y[,sigma])");
    auto* check = app.add_subcommand("parse-check", "parse a .pseq file and print its canonical form");
    for (auto* s : {rabi, map, decay, spectrum, fitcmd}) add_common(s);
    for (auto* s : {rabi, map, spectrum, check}) {
        s->add_option("--sequence", o.sequence, "pulse sequence file (.pseq)")->check(CLI::ExistingFile);
    }
    fitcmd->add_option("--input", o.input, "series CSV")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*check) return parse_check(o);
        if (*fitcmd) return fit(o);
        const RunConfig c = resolve(o);
        if (*rabi) return emit(run_rabi(c, sequence_text(o)), c, o);
        if (*map) return emit(run_echo_map(c, sequence_text(o)), c, o);
        if (*decay) return emit(run_echo_decay(c), c, o);
        if (*spectrum) return emit(run_spectrum(c, sequence_text(o)), c, o);
    } catch (const pseq::ParseError& e) {
        for (const auto& d : e.diagnostics) std::cerr << "pedmr: " << d.format() << '\n';
        return exit_parse;
    } catch (const ConfigError& e) {
        std::cerr << "pedmr: configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "pedmr: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
