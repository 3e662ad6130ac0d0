#include "fedscope/telemetry.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"

namespace fedscope::telemetry {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts) t += c;
  return t;
}

MetricSummary metrics_from(const ConfusionMatrix& m) {
  if (m.classes < 1 || m.total() == 0)
    throw validation_error("metrics: empty confusion matrix");

  MetricSummary s;
  std::int64_t trace = 0;
  double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
  for (int k = 0; k < m.classes; ++k) {
    std::int64_t tp = m.at(k, k);
    trace += tp;
    std::int64_t truth = 0, predicted = 0;
    for (int j = 0; j < m.classes; ++j) {
      truth += m.at(k, j);
      predicted += m.at(j, k);
    }
    double p = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    double r = truth > 0 ? static_cast<double>(tp) / static_cast<double>(truth) : 0.0;
    double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    precision_sum += p;
    recall_sum += r;
    f1_sum += f1;
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(m.total());
  s.precision = precision_sum / m.classes;
  s.recall = recall_sum / m.classes;
  s.f1 = f1_sum / m.classes;
  return s;
}

EvalResult evaluate(const hierarchy::HierarchicalModel& model, const synthdata::Dataset& dataset,
                    const std::vector<std::int32_t>& rows, int use_case, std::uint64_t seed,
                    const synthdata::CorruptionRecipe& recipe) {
  if (rows.empty()) throw validation_error("evaluate: empty evaluation split");
  if (use_case < 0 || use_case > 5)
    throw validation_error("evaluate: use case must be 0 (clean) or 1..5");
  model.validate();

  const synthdata::DatasetSpec& spec = dataset.spec;
  EvalResult result;
  result.confusion = ConfusionMatrix(spec.total_classes());

  for (std::int32_t pos : rows) {
    const synthdata::Sample& sample = dataset.samples[static_cast<std::size_t>(pos)];
    std::vector<double> image(sample.pixels.begin(), sample.pixels.end());
    if (use_case != 0) {
      std::uint64_t sample_seed = rng::derive_seed(
          seed, "corrupt",
          {static_cast<std::uint64_t>(use_case), static_cast<std::uint64_t>(sample.id)});
      image = synthdata::corrupt(image, spec.side, use_case, sample_seed, recipe);
    }
    hierarchy::Prediction p = hierarchy::predict(model, image);
    int predicted_flat = spec.flat_class(p.group, p.disease);
    ++result.confusion.at(sample.flat, predicted_flat);
  }
  result.metrics = metrics_from(result.confusion);
  return result;
}

std::string format_double(double value) {
  char buf[64];
  std::to_chars_result r = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, r.ptr);
}

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& comments,
                 const std::string& header, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write csv: " + path);
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << header << "\n";
  for (const std::string& line : lines) out << line << "\n";
  if (!out) throw io_error("failed writing csv: " + path);
}

double parse_field_double(const std::string& field, const std::string& path) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  std::from_chars_result r = std::from_chars(first, last, v);
  if (r.ec != std::errc{} || r.ptr != last)
    throw validation_error("bad numeric field '" + field + "' in " + path);
  return v;
}

}  // namespace

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows,
                      const std::vector<std::string>& comments) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const ReportRow& r : rows) {
    std::ostringstream line;
    line << r.model << ',' << r.aggregator << ',' << format_double(r.accuracy) << ','
         << format_double(r.recall) << ',' << format_double(r.precision) << ','
         << format_double(r.f1) << ',' << format_double(r.total_energy_wh) << ','
         << format_double(r.total_time_s) << ',' << format_double(r.eta);
    lines.push_back(line.str());
  }
  write_lines(path, comments, kReportHeader, lines);
}

void write_round_log_csv(const std::string& path, const std::vector<hierarchy::RoundLog>& rows,
                         const std::vector<std::string>& comments) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const hierarchy::RoundLog& r : rows) {
    std::ostringstream line;
    line << r.session << ',' << r.round << ',' << r.participants << ','
         << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
         << format_double(r.val_acc) << ',' << format_double(r.cum_energy_wh) << ','
         << format_double(r.cum_time_s);
    lines.push_back(line.str());
  }
  write_lines(path, comments, kRoundHeader, lines);
}

std::vector<ReportRow> parse_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open csv: " + path);

  std::vector<ReportRow> rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != kReportHeader)
        throw validation_error("unexpected report header in " + path + ": '" + line + "'");
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 9)
      throw validation_error("expected 9 fields per report row in " + path + ", got " +
                             std::to_string(fields.size()));
    ReportRow r;
    r.model = fields[0];
    r.aggregator = fields[1];
    r.accuracy = parse_field_double(fields[2], path);
    r.recall = parse_field_double(fields[3], path);
    r.precision = parse_field_double(fields[4], path);
    r.f1 = parse_field_double(fields[5], path);
    r.total_energy_wh = parse_field_double(fields[6], path);
    r.total_time_s = parse_field_double(fields[7], path);
    r.eta = parse_field_double(fields[8], path);
    rows.push_back(std::move(r));
  }
  if (!saw_header) throw validation_error("missing report header in " + path);
  return rows;
}

}  // namespace fedscope::telemetry
