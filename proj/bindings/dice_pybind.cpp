// Python bindings for the core evaluation operations.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dice/datagen.hpp"
#include "dice/detmetrics.hpp"
#include "dice/evalcomp.hpp"
#include "dice/parse.hpp"
#include "dice/types.hpp"

namespace py = pybind11;
using namespace dice;

PYBIND11_MODULE(_dice, m) {
    m.doc() = "Reference-free evaluation for instruction-based image editing";

    py::enum_<EditCommand>(m, "EditCommand")
        .value("ADD", EditCommand::Add)
        .value("REMOVE", EditCommand::Remove)
        .value("EDIT", EditCommand::Edit);

    py::class_<NormalizedBBox>(m, "NormalizedBBox")
        .def(py::init<double, double, double, double>(), py::arg("x_min"), py::arg("y_min"),
             py::arg("x_max"), py::arg("y_max"))
        .def_property_readonly("x_min", &NormalizedBBox::x_min)
        .def_property_readonly("y_min", &NormalizedBBox::y_min)
        .def_property_readonly("x_max", &NormalizedBBox::x_max)
        .def_property_readonly("y_max", &NormalizedBBox::y_max)
        .def_property_readonly("width", &NormalizedBBox::width)
        .def_property_readonly("height", &NormalizedBBox::height)
        .def_property_readonly("area", &NormalizedBBox::area)
        .def("__eq__", [](const NormalizedBBox& a, const NormalizedBBox& b) { return a == b; })
        .def("__repr__", [](const NormalizedBBox& b) {
            return "NormalizedBBox(" + std::to_string(b.x_min()) + ", " +
                   std::to_string(b.y_min()) + ", " + std::to_string(b.x_max()) + ", " +
                   std::to_string(b.y_max()) + ")";
        });

    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("pixel_area", &pixel_area, py::arg("bbox"), py::arg("width"), py::arg("height"));

    py::class_<Difference>(m, "Difference")
        .def(py::init([](EditCommand command, const std::string& subject,
                         const NormalizedBBox& bbox, double confidence) {
                 return Difference{command, subject, bbox, confidence, false};
             }),
             py::arg("command"), py::arg("subject"), py::arg("bbox"),
             py::arg("confidence") = 1.0)
        .def_readwrite("command", &Difference::command)
        .def_readwrite("subject", &Difference::subject)
        .def_readwrite("bbox", &Difference::bbox)
        .def_readwrite("confidence", &Difference::confidence)
        .def_readwrite("confidence_fallback", &Difference::confidence_fallback);

    py::class_<GroundTruthDifference>(m, "GroundTruthDifference")
        .def(py::init([](EditCommand command, const std::string& subject,
                         const NormalizedBBox& bbox, std::optional<bool> coherent) {
                 return GroundTruthDifference{command, subject, bbox, coherent};
             }),
             py::arg("command"), py::arg("subject"), py::arg("bbox"),
             py::arg("coherent") = py::none())
        .def_readwrite("command", &GroundTruthDifference::command)
        .def_readwrite("subject", &GroundTruthDifference::subject)
        .def_readwrite("bbox", &GroundTruthDifference::bbox)
        .def_readwrite("coherent", &GroundTruthDifference::coherent);

    py::class_<CoherenceVerdict>(m, "CoherenceVerdict")
        .def(py::init([](bool decision, const std::string& rationale, bool flagged) {
                 return CoherenceVerdict{decision, rationale, flagged};
             }),
             py::arg("decision"), py::arg("rationale") = "",
             py::arg("flagged_unparseable") = false)
        .def_readwrite("decision", &CoherenceVerdict::decision)
        .def_readwrite("rationale", &CoherenceVerdict::rationale)
        .def_readwrite("flagged_unparseable", &CoherenceVerdict::flagged_unparseable);

    py::class_<MalformedLine>(m, "MalformedLine")
        .def_readonly("line", &MalformedLine::line)
        .def_readonly("reason", &MalformedLine::reason);

    py::class_<ParseReport>(m, "ParseReport")
        .def_readonly("differences", &ParseReport::differences)
        .def_readonly("malformed_lines", &ParseReport::malformed_lines)
        .def_readonly("raw_text", &ParseReport::raw_text);

    m.def("parse_differences", &parse_differences, py::arg("raw_text"));
    m.def("serialize_differences", &serialize_differences, py::arg("differences"));
    m.def("serialize_difference", &serialize_difference, py::arg("difference"));

    py::class_<EditCase>(m, "EditCase")
        .def(py::init<>())
        .def_readwrite("case_id", &EditCase::case_id)
        .def_readwrite("original_image", &EditCase::original_image)
        .def_readwrite("edited_image", &EditCase::edited_image)
        .def_readwrite("prompt", &EditCase::prompt)
        .def_readwrite("width", &EditCase::width)
        .def_readwrite("height", &EditCase::height)
        .def_readwrite("ground_truth", &EditCase::ground_truth);

    py::enum_<APMode>(m, "APMode")
        .value("CLASS_AGNOSTIC", APMode::ClassAgnostic)
        .value("CLASS_AWARE", APMode::ClassAware);

    py::class_<APReport>(m, "APReport")
        .def_readonly("ap", &APReport::ap)
        .def_readonly("ap50", &APReport::ap50)
        .def_readonly("ap75", &APReport::ap75)
        .def_readonly("ap_m", &APReport::ap_m)
        .def_readonly("ap_l", &APReport::ap_l)
        .def_readonly("per_class", &APReport::per_class);

    py::class_<DetectionCase>(m, "DetectionCase")
        .def(py::init([](EditCase edit_case, std::vector<Difference> preds) {
                 return DetectionCase{std::move(preds), std::move(edit_case)};
             }),
             py::arg("edit_case"), py::arg("preds"))
        .def_readwrite("preds", &DetectionCase::preds)
        .def_readwrite("edit_case", &DetectionCase::edit_case);

    m.def("evaluate_detection", &evaluate_detection, py::arg("cases"),
          py::arg("mode") = APMode::ClassAgnostic);

    py::class_<CoherenceCase>(m, "CoherenceCase")
        .def(py::init([](EditCase edit_case, std::vector<Difference> preds,
                         std::vector<CoherenceVerdict> verdicts) {
                 return CoherenceCase{std::move(preds), std::move(verdicts),
                                      std::move(edit_case)};
             }),
             py::arg("edit_case"), py::arg("preds"), py::arg("verdicts"))
        .def_readwrite("preds", &CoherenceCase::preds)
        .def_readwrite("verdicts", &CoherenceCase::verdicts)
        .def_readwrite("edit_case", &CoherenceCase::edit_case);

    m.def("coherence_accuracy", &coherence_accuracy, py::arg("ground_truth"),
          py::arg("verdicts"));
    m.def("evaluate_coherence_ap", &evaluate_coherence_ap, py::arg("cases"));

    m.def("union_area", &union_area, py::arg("boxes"));

    py::class_<CorrelationReport>(m, "CorrelationReport")
        .def_readonly("pearson", &CorrelationReport::pearson)
        .def_readonly("spearman", &CorrelationReport::spearman)
        .def_readonly("kendall", &CorrelationReport::kendall)
        .def_readonly("sample_count", &CorrelationReport::sample_count);

    m.def("correlate", &correlate, py::arg("metric_scores"), py::arg("human_scores"));

    py::class_<AnnotatedObject>(m, "AnnotatedObject")
        .def(py::init([](const std::string& class_name, const NormalizedBBox& bbox) {
                 return AnnotatedObject{class_name, bbox, std::nullopt};
             }),
             py::arg("class_name"), py::arg("bbox"))
        .def_readwrite("class_name", &AnnotatedObject::class_name)
        .def_readwrite("bbox", &AnnotatedObject::bbox);

    py::class_<AnnotatedImage>(m, "AnnotatedImage")
        .def(py::init<>())
        .def_readwrite("image_id", &AnnotatedImage::image_id)
        .def_readwrite("width", &AnnotatedImage::width)
        .def_readwrite("height", &AnnotatedImage::height)
        .def_readwrite("objects", &AnnotatedImage::objects)
        .def_readwrite("embedding", &AnnotatedImage::embedding);

    py::class_<Stage1Pair>(m, "Stage1Pair")
        .def_readonly("image_a", &Stage1Pair::image_a)
        .def_readonly("image_b", &Stage1Pair::image_b)
        .def_readonly("cosine_similarity", &Stage1Pair::cosine_similarity)
        .def_readonly("labels", &Stage1Pair::labels);

    m.def(
        "mine_pairs",
        [](const std::vector<AnnotatedImage>& corpus, double sim_threshold,
           int max_class_diff) {
            MiningParams params;
            params.sim_threshold = sim_threshold;
            params.max_class_diff = max_class_diff;
            return mine_pairs(corpus, params);
        },
        py::arg("corpus"), py::arg("sim_threshold") = 0.6, py::arg("max_class_diff") = 15);
    m.def(
        "label_pair",
        [](const AnnotatedImage& a, const AnnotatedImage& b, double edit_iou_threshold,
           int min_side_px) {
            LabelParams params;
            params.edit_iou_threshold = edit_iou_threshold;
            params.min_side_px = min_side_px;
            return label_pair(a, b, params);
        },
        py::arg("a"), py::arg("b"), py::arg("edit_iou_threshold") = 0.5,
        py::arg("min_side_px") = 16);
    m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));
}
