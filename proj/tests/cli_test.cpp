#include "commands.hpp"
#include "run_config.hpp"

#include <bmsvm/error.hpp>
#include <bmsvm/kernel.hpp>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bmsvm;
using namespace bmsvm::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(::testing::TempDir()) / "bmsvm_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Three separated blobs in 2-D, 5 per class, labels a/b/c in the last column.
std::string blob_csv() {
    std::ostringstream os;
    os << "x1,x2,kind\n";
    const char* names[] = {"a", "b", "c"};
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 5; ++i) {
            os << 3.0 * j + 0.2 * i << ',' << (i % 2 ? 0.3 : -0.3) * (j + 1) << ',' << names[j] << '\n';
        }
    }
    return os.str();
}

int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
    std::string cmd = std::string("\"") + BMSVM_CLI_EXE + "\" " + args;
    cmd += stdout_file.empty() ? " > /dev/null" : " > \"" + stdout_file.string() + "\"";
    cmd += " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST(RunConfigParse, FlatKeys) {
    const RunConfig cfg = parse_run_config(R"(
data = "wine.csv"
label = "class"
method = "map"
theta = 3.5
m1 = 200
m2 = 100
thin = 10
protocol = "split"
n_train = 30
n_repeats = 2
seed = 9
eta = 500
shape_mode = "exact"
)");
    EXPECT_EQ(cfg.data, "wine.csv");
    EXPECT_EQ(cfg.method, Method::map);
    EXPECT_EQ(cfg.theta_mode, ThetaMode::fixed);
    EXPECT_DOUBLE_EQ(cfg.theta, 3.5);
    EXPECT_EQ(cfg.schedule.retained(), 10);
    EXPECT_EQ(cfg.protocol, Protocol::split);
    EXPECT_EQ(cfg.n_train, 30);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_DOUBLE_EQ(cfg.hyper.eta, 500.0);
    EXPECT_EQ(cfg.hyper.shape_mode, ShapeMode::exact);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfigParse, Defaults) {
    const RunConfig cfg = parse_run_config("data = \"x.csv\"\n");
    EXPECT_DOUBLE_EQ(cfg.hyper.eta, 1000.0);
    EXPECT_DOUBLE_EQ(cfg.hyper.a_sigma, 3.0);
    EXPECT_DOUBLE_EQ(cfg.hyper.b_sigma, 10.0);
    EXPECT_DOUBLE_EQ(cfg.hyper.a_tau, 4.0);
    EXPECT_DOUBLE_EQ(cfg.hyper.b_tau, 0.1);
    EXPECT_DOUBLE_EQ(cfg.hyper.theta_lo, 0.1);
    EXPECT_DOUBLE_EQ(cfg.hyper.theta_hi, 200.0);
    EXPECT_EQ(cfg.schedule.m1, 10000);
    EXPECT_EQ(cfg.schedule.m2, 5000);
    EXPECT_EQ(cfg.schedule.thin, 10);
    EXPECT_EQ(cfg.jobs, 1);
}

TEST(RunConfigParse, Rejections) {
    EXPECT_THROW(parse_run_config("dta = \"x\"\n"), ParameterError);
    EXPECT_THROW(parse_run_config("theta = 1.0\ntheta_grid = [1.0, 2.0]\n"), ParameterError);
    EXPECT_THROW(parse_run_config("theta = \"wide\"\n"), ParameterError);
    EXPECT_THROW(parse_run_config("protocol = \"kfold\"\n"), ParameterError);
    EXPECT_THROW(parse_run_config("data = [\n"), ParameterError);
    RunConfig cfg = parse_run_config("data = \"x.csv\"\nm1 = 100\nm2 = 50\nthin = 7\n");
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = parse_run_config("data = \"x.csv\"\nmethod = \"map\"\ntheta_mh = true\n");
    EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(RunConfigParse, ThetaFlag) {
    RunConfig cfg;
    apply_theta_flag(cfg, "2.5");
    EXPECT_EQ(cfg.theta_mode, ThetaMode::fixed);
    EXPECT_DOUBLE_EQ(cfg.theta, 2.5);
    apply_theta_flag(cfg, "1,3.5,10");
    EXPECT_EQ(cfg.theta_mode, ThetaMode::grid);
    EXPECT_EQ(cfg.theta_grid, (std::vector<double>{1.0, 3.5, 10.0}));
    apply_theta_flag(cfg, "mh");
    EXPECT_EQ(cfg.theta_mode, ThetaMode::mh);
    EXPECT_THROW(apply_theta_flag(cfg, "1,x"), ParameterError);
}

TEST(RunConfigParse, ScheduleFlag) {
    const SamplerSchedule s = parse_schedule("2000,1000,10");
    EXPECT_EQ(s.retained(), 100);
    EXPECT_THROW(parse_schedule("2000,1000"), ParameterError);
    EXPECT_THROW(parse_schedule("100,200,10"), ParameterError);
}

TEST(RunConfigParse, LabelRef) {
    EXPECT_EQ(std::get<int>(label_ref("-1")), -1);
    EXPECT_EQ(std::get<int>(label_ref("0")), 0);
    EXPECT_EQ(std::get<std::string>(label_ref("class")), "class");
}

TEST(Manifest, FnvReferenceValues) {
    // Published FNV-1a 64-bit test vectors.
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Manifest, HashTracksConfig) {
    RunConfig a;
    a.data = "x.csv";
    RunConfig b = a;
    EXPECT_EQ(manifest_json(a, "eval"), manifest_json(b, "eval"));
    b.hyper.eta = 999.0;
    const auto ja = nlohmann::json::parse(manifest_json(a, "eval"));
    const auto jb = nlohmann::json::parse(manifest_json(b, "eval"));
    EXPECT_NE(ja["config_hash"], jb["config_hash"]);
    EXPECT_EQ(ja["seed"], 1);
    EXPECT_TRUE(ja.contains("version"));
}

TEST(ModelFileJson, RoundTrip) {
    ModelFile m;
    m.method = Method::bmsvm;
    m.theta_mode = ThetaMode::mh;
    m.label_name = "kind";
    m.label_vocabulary = {"a", "b"};
    m.feature_names = {"x1", "x2"};
    m.stats.means = Vector::Constant(2, 0.25);
    m.stats.sds = Vector::Constant(2, 2.0);
    m.model.num_classes = 2;
    m.model.train_inputs = Matrix::Random(3, 2);
    SampleRecord r;
    r.sweep = 12;
    r.sigma2 = 0.1 / 3.0;
    r.tau = 7.0;
    r.theta = 1.0 / 7.0;
    r.w0 = Vector::Random(2);
    r.w = Matrix::Random(3, 2);
    m.model.samples.records = {r, r};
    m.model.samples.z_proposed = 10;
    m.model.samples.z_accepted = 4;

    const std::string text = model_to_json(m);
    const ModelFile back = model_from_json(text);
    EXPECT_EQ(model_to_json(back), text);
    EXPECT_EQ(back.model.samples.records.size(), 2u);
    EXPECT_EQ(back.model.samples.records[0].theta, r.theta);
    EXPECT_EQ(back.model.train_inputs, m.model.train_inputs);
    EXPECT_EQ(back.model.samples.records[1].w, r.w);
    EXPECT_EQ(back.theta_mode, ThetaMode::mh);
}

TEST(ModelFileJson, RejectsGarbage) {
    EXPECT_THROW(model_from_json("{"), ParseError);
    EXPECT_THROW(model_from_json("{\"format\": \"other\"}"), ParseError);
    EXPECT_THROW(model_from_json("{\"format\": \"bmsvm-model/1\"}"), ParseError);
}

TEST(ExitCodes, ByCategory) {
    EXPECT_EQ(exit_code_for(ParameterError("x")), 1);
    EXPECT_EQ(exit_code_for(ParseError("x", 1, 1)), 2);
    EXPECT_EQ(exit_code_for(FoldDegeneracyError("x", 2)), 2);
    EXPECT_EQ(exit_code_for(DivergenceError("x", 3)), 3);
    EXPECT_EQ(exit_code_for(ConditioningError("x", -1.0)), 3);
}

TEST(CliTrain, MapModelHasOneRecordAndReproducesDecisionValues) {
    const fs::path dir = scratch("map");
    write(dir / "blobs.csv", blob_csv());
    RunConfig cfg;
    cfg.data = (dir / "blobs.csv").string();
    cfg.method = Method::map;
    cfg.theta = 1.5;
    cfg.map.lambda = 0.1;
    cfg.out = (dir / "out").string();
    std::ostringstream log;
    cmd_train(cfg, log);

    const ModelFile m = model_from_json(slurp(dir / "out" / "model.json"));
    ASSERT_EQ(m.model.samples.records.size(), 1u);
    EXPECT_EQ(m.label_name, "kind");
    EXPECT_EQ(m.label_vocabulary, (std::vector<std::string>{"a", "b", "c"}));

    std::ostringstream csv;
    cmd_predict((dir / "out" / "model.json").string(), cfg.data, ',', csv);

    // Independent recomputation: f = K(x, X) W + w0 from the stored record.
    const auto& rec = m.model.samples.records[0];
    const Matrix z = m.stats.apply(load_csv(cfg.data, std::string("kind")).features);
    const Matrix k = cross_kernel(z, m.model.train_inputs, 1.5);
    Matrix f = k * rec.w;
    f.rowwise() += rec.w0.transpose();

    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "id,predicted_label,score_1,score_2,score_3");
    int row = 0;
    int correct = 0;
    while (std::getline(lines, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        EXPECT_EQ(std::stoi(cell), row + 1);
        std::getline(ss, cell, ',');
        correct += cell == std::string(1, static_cast<char>('a' + row / 5));
        for (int j = 0; j < 3; ++j) {
            std::getline(ss, cell, ',');
            const double expect = std::exp(-std::max(0.0, f(row, j) + 0.5));
            EXPECT_NEAR(std::stod(cell), expect, 1e-12);
        }
        ++row;
    }
    EXPECT_EQ(row, 15);
    EXPECT_EQ(correct, 15);
}

TEST(CliTrain, SameSeedGivesIdenticalModelFiles) {
    const fs::path dir = scratch("determinism");
    write(dir / "blobs.csv", blob_csv());
    const std::string base = "train --data \"" + (dir / "blobs.csv").string() +
                             "\" --label kind --method bmsvm --theta 1.5 --schedule 100,50,10 --seed 4 --out ";
    ASSERT_EQ(run_cli(base + "\"" + (dir / "a").string() + "\""), 0);
    ASSERT_EQ(run_cli(base + "\"" + (dir / "b").string() + "\""), 0);
    const std::string a = slurp(dir / "a" / "model.json");
    EXPECT_EQ(a, slurp(dir / "b" / "model.json"));
    EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
    EXPECT_EQ(model_from_json(a).model.samples.records.size(), 5u);
}

TEST(CliPredict, EmptyInputGivesHeaderOnly) {
    const fs::path dir = scratch("empty");
    write(dir / "blobs.csv", blob_csv());
    write(dir / "empty.csv", "");
    ASSERT_EQ(run_cli("train --data \"" + (dir / "blobs.csv").string() +
                      "\" --method map --theta 1 --out \"" + (dir / "m").string() + "\""),
              0);
    const fs::path pred = dir / "pred.csv";
    EXPECT_EQ(run_cli("predict --model \"" + (dir / "m" / "model.json").string() + "\" --data \"" +
                          (dir / "empty.csv").string() + "\"",
                      pred),
              0);
    EXPECT_EQ(slurp(pred), "id,predicted_label,score_1,score_2,score_3\n");
}

TEST(CliPredict, FeatureCountMismatchIsDataError) {
    const fs::path dir = scratch("mismatch");
    write(dir / "blobs.csv", blob_csv());
    write(dir / "wide.csv", "x1,x2,x3\n1,2,3\n");
    RunConfig cfg;
    cfg.data = (dir / "blobs.csv").string();
    cfg.method = Method::map;
    cfg.out = (dir / "m").string();
    std::ostringstream log;
    cmd_train(cfg, log);
    std::ostringstream out;
    try {
        cmd_predict((dir / "m" / "model.json").string(), (dir / "wide.csv").string(), ',', out);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("expects 2 features, found 3"), std::string::npos);
    }
    EXPECT_EQ(run_cli("predict --model \"" + (dir / "m" / "model.json").string() + "\" --data \"" +
                      (dir / "wide.csv").string() + "\""),
              2);
}

TEST(CliEval, WritesJsonSummaryAndManifest) {
    const fs::path dir = scratch("eval");
    write(dir / "blobs.csv", blob_csv());
    write(dir / "run.toml", "data = \"blobs.csv\"\nlabel = \"kind\"\nmethod = \"map\"\ntheta = 1.5\n"
                            "lambda = 0.1\nprotocol = \"loo\"\nseed = 3\n");
    const std::string env = "BMSVM_DATA_DIR=\"" + dir.string() + "\" ";
    const fs::path out = dir / "out";
    const std::string cmd = std::string("cd \"") + dir.string() + "/..\" && " + env + "\"" + BMSVM_CLI_EXE +
                            "\" eval --config \"" + (dir / "run.toml").string() + "\" --out \"" + out.string() +
                            "\" > /dev/null 2>&1";
    ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);

    const auto j = nlohmann::json::parse(slurp(out / "eval.json"));
    EXPECT_EQ(j["protocol"], "loo");
    EXPECT_EQ(j["n_test"], 15);
    EXPECT_EQ(j["metadata"]["status"], "complete");
    EXPECT_EQ(j["per_split_errors"].size(), 15u);
    const std::string summary = slurp(out / "summary.csv");
    EXPECT_EQ(summary.substr(0, summary.find('\n')), "dataset,method,protocol,error_rate,seed,schedule");
    EXPECT_NE(summary.find("blobs,map,loo,"), std::string::npos);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["seed"], 3);
    EXPECT_EQ(manifest["command"], "eval");
}

TEST(CliEval, FailedRunIsMarked) {
    const fs::path dir = scratch("eval_fail");
    // Class "c" has a single member, so its LOO fold has no training points for it.
    write(dir / "tiny.csv", "x,y\n0,a\n1,a\n2,b\n3,b\n9,c\n");
    const fs::path out = dir / "out";
    EXPECT_EQ(run_cli("eval --data \"" + (dir / "tiny.csv").string() + "\" --method map --theta 1 --out \"" +
                      out.string() + "\""),
              2);
    const auto j = nlohmann::json::parse(slurp(out / "eval.json"));
    EXPECT_EQ(j["status"], "failed");
    EXPECT_EQ(j["error_kind"], "data");
}

TEST(CliExit, UsageAndConfigErrors) {
    const fs::path dir = scratch("usage");
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("train --bogus"), 1);
    write(dir / "bad.toml", "data = \"x.csv\"\ncolour = 3\n");
    EXPECT_EQ(run_cli("train --config \"" + (dir / "bad.toml").string() + "\""), 1);
    EXPECT_EQ(run_cli("train --data \"" + (dir / "missing.csv").string() + "\" --theta 1"), 2);
}

TEST(CliGrid, SelectsThetaInsideTheFold) {
    const fs::path dir = scratch("grid");
    write(dir / "blobs.csv", blob_csv());
    EXPECT_EQ(run_cli("eval --data \"" + (dir / "blobs.csv").string() +
                      "\" --method map --theta 0.5,1.5 --out \"" + (dir / "out").string() + "\""),
              0);
    const auto j = nlohmann::json::parse(slurp(dir / "out" / "eval.json"));
    EXPECT_EQ(j["metadata"]["theta_mode"], "grid");
}
