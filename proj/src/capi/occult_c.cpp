#include "occult/occult.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "occult/classify.hpp"
#include "occult/config.hpp"
#include "occult/error.hpp"
#include "occult/eval.hpp"
#include "occult/fusion.hpp"
#include "occult/image_io.hpp"
#include "occult/phantom.hpp"
#include "occult/pipeline.hpp"
#include "occult/preprocess.hpp"
#include "occult/radon.hpp"
#include "occult/rcdt.hpp"
#include "occult/simulate.hpp"

struct occ_image {
  int channels = 1;
  occult::GrayImage gray;
  occult::RgbImage rgb;
};

struct occ_sinogram {
  occult::Sinogram sino;
};

struct occ_rcdt {
  occult::RcdtImage rcdt;
};

struct occ_model {
  occult::LogisticModel model;
};

struct occ_config {
  occult::PipelineConfig config;
};

namespace {

using occult::ErrorCode;
using occult::fail;

thread_local std::string g_last_error;

template <typename F>
occ_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return OCC_OK;
  } catch (const occult::Error& e) {
    g_last_error = e.what();
    return static_cast<occ_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return OCC_ERR_INTERNAL;
}

template <typename T>
void need(const T* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

const occult::GrayImage& gray_of(const occ_image* img, const char* what) {
  need(img, what);
  if (img->channels != 1) fail(ErrorCode::InvalidArgument, std::string(what) + " must be a gray image");
  return img->gray;
}

occ_image* wrap(occult::GrayImage g) {
  auto* out = new occ_image;
  out->gray = std::move(g);
  return out;
}

occ_image* wrap(occult::RgbImage c) {
  auto* out = new occ_image;
  out->channels = 3;
  out->rgb = std::move(c);
  return out;
}

occult::Side side_of(occ_side s) {
  if (s != OCC_LEFT && s != OCC_RIGHT) fail(ErrorCode::InvalidArgument, "side must be OCC_LEFT or OCC_RIGHT");
  return s == OCC_LEFT ? occult::Side::Left : occult::Side::Right;
}

occult::PhantomParams phantom_of(const occ_phantom_params* p) {
  occult::PhantomParams out;
  if (p) {
    out.size = p->size;
    out.texture_correlation = p->texture_correlation;
    out.lesion_contrast = p->lesion_contrast;
    out.lesion_radius = p->lesion_radius;
    out.lesion_jitter = p->lesion_jitter;
    out.noise_sigma = p->noise_sigma;
  }
  return out;
}

void copy_text(const std::string& text, char* buf, std::size_t capacity, std::size_t* needed) {
  if (needed) *needed = text.size();
  if (buf && capacity > 0) {
    const std::size_t n = std::min(text.size(), capacity - 1);
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
}

std::string str(const char* s, const char* what) {
  need(s, what);
  return s;
}

}  // namespace

extern "C" {

OCC_API const char* occ_version(void) { return "1.0.0"; }

OCC_API const char* occ_status_name(occ_status status) {
  if (status == OCC_OK) return "Ok";
  if (status == OCC_ERR_INTERNAL) return "Internal";
  if (status >= OCC_ERR_INVALID_ARGUMENT && status <= OCC_ERR_NUMERICAL) {
    return occult::error_code_name(static_cast<ErrorCode>(status));
  }
  return "Unknown";
}

OCC_API const char* occ_last_error(void) { return g_last_error.c_str(); }

OCC_API occ_status occ_image_create(int width, int height, int channels, const double* data,
                                    occ_image** out) {
  return guarded([&] {
    need(out, "out");
    if (width < 0 || height < 0) fail(ErrorCode::InvalidArgument, "negative image size");
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (channels == 1) {
      *out = wrap(data ? occult::GrayImage(width, height, std::vector<double>(data, data + n))
                       : occult::GrayImage(width, height));
    } else if (channels == 3) {
      *out = wrap(data ? occult::RgbImage(width, height, std::vector<double>(data, data + 3 * n))
                       : occult::RgbImage(width, height));
    } else {
      fail(ErrorCode::InvalidArgument, "channels must be 1 or 3");
    }
  });
}

OCC_API occ_status occ_image_load(const char* path, int channels, occ_image** out) {
  return guarded([&] {
    need(out, "out");
    const std::string p = str(path, "path");
    if (channels == 1) {
      *out = wrap(occult::load_image(p));
    } else if (channels == 3) {
      *out = wrap(occult::load_rgb_image(p));
    } else {
      fail(ErrorCode::InvalidArgument, "channels must be 1 or 3");
    }
  });
}

OCC_API occ_status occ_image_save(const occ_image* img, const char* path, int bit_depth) {
  return guarded([&] {
    need(img, "img");
    const std::string p = str(path, "path");
    if (img->channels == 1) {
      occult::save_image(img->gray, p, bit_depth);
    } else {
      occult::save_image(img->rgb, p, bit_depth);
    }
  });
}

OCC_API int occ_image_width(const occ_image* img) {
  if (!img) return 0;
  return img->channels == 1 ? img->gray.width() : img->rgb.width();
}

OCC_API int occ_image_height(const occ_image* img) {
  if (!img) return 0;
  return img->channels == 1 ? img->gray.height() : img->rgb.height();
}

OCC_API int occ_image_channels(const occ_image* img) { return img ? img->channels : 0; }

OCC_API const double* occ_image_data(const occ_image* img) {
  if (!img) return nullptr;
  return img->channels == 1 ? img->gray.pixels().data() : img->rgb.pixels().data();
}

OCC_API void occ_image_free(occ_image* img) { delete img; }

OCC_API occ_status occ_image_resize(const occ_image* img, int width, int height, occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::resize_bicubic(gray_of(img, "img"), width, height));
  });
}

OCC_API occ_status occ_image_flip(const occ_image* img, int horizontal, occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::flip(gray_of(img, "img"),
                             horizontal ? occult::FlipAxis::Horizontal : occult::FlipAxis::Vertical));
  });
}

OCC_API occ_status occ_segment_breast(const occ_image* img, occ_image** mask, int bbox[4]) {
  return guarded([&] {
    const occult::BreastMask m = occult::segment_breast(gray_of(img, "img"));
    if (mask) {
      occult::GrayImage g(m.width, m.height);
      for (std::size_t i = 0; i < m.mask.size(); ++i) g.pixels()[i] = m.mask[i] ? 1.0 : 0.0;
      *mask = wrap(std::move(g));
    }
    if (bbox) {
      bbox[0] = m.bbox.x0;
      bbox[1] = m.bbox.y0;
      bbox[2] = m.bbox.x1;
      bbox[3] = m.bbox.y1;
    }
  });
}

OCC_API occ_status occ_preprocess_view(const occ_image* img, occ_side side, int width, int height,
                                       occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::preprocess_view(gray_of(img, "img"), side_of(side), width, height));
  });
}

OCC_API occ_status occ_standardize_orientation(const occ_image* img, occ_side side, occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::standardize_orientation(gray_of(img, "img"), side_of(side)));
  });
}

OCC_API occ_status occ_clahe(const occ_image* img, double clip_limit, int tiles_x, int tiles_y, int bins,
                             occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::clahe(gray_of(img, "img"), {clip_limit, tiles_x, tiles_y, bins}));
  });
}

OCC_API occ_status occ_radon(const occ_image* img, int n_theta, occ_sinogram** out) {
  return guarded([&] {
    need(out, "out");
    *out = new occ_sinogram{occult::radon(gray_of(img, "img"), n_theta)};
  });
}

OCC_API occ_status occ_iradon(const occ_sinogram* sino, int width, int height, int hann_window,
                              occ_image** out) {
  return guarded([&] {
    need(sino, "sino");
    need(out, "out");
    *out = wrap(occult::iradon(sino->sino, width, height,
                               hann_window ? occult::RampWindow::Hann : occult::RampWindow::None));
  });
}

OCC_API int occ_sinogram_n_t(const occ_sinogram* sino) { return sino ? sino->sino.n_t() : 0; }
OCC_API int occ_sinogram_n_theta(const occ_sinogram* sino) { return sino ? sino->sino.n_theta() : 0; }
OCC_API const double* occ_sinogram_values(const occ_sinogram* sino) {
  return sino ? sino->sino.values().data() : nullptr;
}
OCC_API void occ_sinogram_free(occ_sinogram* sino) { delete sino; }

OCC_API occ_status occ_rcdt_forward(const occ_image* templ, const occ_image* target, int n_theta,
                                    occ_rcdt** out) {
  return guarded([&] {
    need(out, "out");
    *out = new occ_rcdt{occult::forward_rcdt(gray_of(templ, "templ"), gray_of(target, "target"), n_theta)};
  });
}

OCC_API int occ_rcdt_n_t(const occ_rcdt* rcdt) { return rcdt ? rcdt->rcdt.values.n_t() : 0; }
OCC_API int occ_rcdt_n_theta(const occ_rcdt* rcdt) { return rcdt ? rcdt->rcdt.values.n_theta() : 0; }
OCC_API const double* occ_rcdt_values(const occ_rcdt* rcdt) {
  return rcdt ? rcdt->rcdt.values.values().data() : nullptr;
}

OCC_API occ_status occ_rcdt_visualize(const occ_rcdt* rcdt, int width, int height, occ_image** out) {
  return guarded([&] {
    need(rcdt, "rcdt");
    need(out, "out");
    *out = wrap(occult::visualize_rcdt(rcdt->rcdt, width, height));
  });
}

OCC_API occ_status occ_rcdt_inverse(const occ_rcdt* rcdt, const occ_image* templ, int width, int height,
                                    occ_image** out) {
  return guarded([&] {
    need(rcdt, "rcdt");
    need(out, "out");
    const occult::Sinogram t = occult::radon(gray_of(templ, "templ"), rcdt->rcdt.values.n_theta());
    *out = wrap(occult::inverse_rcdt(rcdt->rcdt, t, width, height));
  });
}

OCC_API occ_status occ_rcdt_dump(const occ_rcdt* rcdt, const char* path) {
  return guarded([&] {
    need(rcdt, "rcdt");
    occult::dump_sinogram(rcdt->rcdt.values, str(path, "path"));
  });
}

OCC_API void occ_rcdt_free(occ_rcdt* rcdt) { delete rcdt; }

OCC_API occ_status occ_fuse(const occ_image* a, const occ_image* b, occ_image** out) {
  return guarded([&] {
    need(out, "out");
    *out = wrap(occult::fuse_green_magenta(gray_of(a, "a"), gray_of(b, "b")));
  });
}

OCC_API occ_status occ_simulate(const occ_image* input, occ_simulator kind, double smoothing_sigma,
                                const char* external_dir, const char* case_id, const char* view,
                                occ_image** out) {
  return guarded([&] {
    need(out, "out");
    occult::SimulatorSpec spec;
    if (kind == OCC_SIM_MIRROR) {
      spec.kind = occult::SimulatorKind::Mirror;
    } else if (kind == OCC_SIM_EXTERNAL) {
      spec.kind = occult::SimulatorKind::External;
      spec.external_dir = str(external_dir, "external_dir");
    } else {
      fail(ErrorCode::InvalidArgument, "unknown simulator kind");
    }
    spec.smoothing_sigma = smoothing_sigma;
    *out = wrap(occult::simulate_contralateral(gray_of(input, "input"), spec, case_id ? case_id : "",
                                               view ? view : ""));
  });
}

OCC_API void occ_phantom_defaults(occ_phantom_params* params) {
  if (!params) return;
  const occult::PhantomParams d;
  *params = {d.size, d.texture_correlation, d.lesion_contrast, d.lesion_radius, d.lesion_jitter,
             d.noise_sigma};
}

OCC_API occ_status occ_phantom_case(uint64_t seed, const occ_phantom_params* params, int cancer,
                                    occ_image* views[4], int* cancer_side) {
  return guarded([&] {
    need(views, "views");
    const occult::CaseRecord rec = occult::generate_case(
        seed, phantom_of(params), cancer ? occult::Label::Cancer : occult::Label::Control);
    const occult::Side sides[4] = {occult::Side::Left, occult::Side::Right, occult::Side::Left,
                                   occult::Side::Right};
    const occult::View kinds[4] = {occult::View::Cc, occult::View::Cc, occult::View::Mlo, occult::View::Mlo};
    for (int i = 0; i < 4; ++i) views[i] = wrap(rec.view(sides[i], kinds[i]).image);
    if (cancer_side) {
      *cancer_side = rec.cancer_side ? static_cast<int>(*rec.cancer_side) : -1;
    }
  });
}

OCC_API occ_status occ_phantom_cohort(uint64_t seed, int n_controls, int n_cancers,
                                      const occ_phantom_params* params, const char* dir) {
  return guarded([&] {
    occult::PipelineConfig c;
    c.seed = seed;
    c.n_controls = n_controls;
    c.n_cancers = n_cancers;
    c.phantom = phantom_of(params);
    occult::stage_phantom(c, str(dir, "dir"));
  });
}

OCC_API occ_status occ_window_count(int width, int height, int window, int stride_x, int stride_y,
                                    size_t* count) {
  return guarded([&] {
    need(count, "count");
    if (stride_x < 1 || stride_y < 1) fail(ErrorCode::InvalidArgument, "strides must be positive");
    *count = occult::extract_windows(width, height, window, stride_x, stride_y).positions.size();
  });
}

OCC_API occ_status occ_window_features(const occ_image* window, double* out, size_t capacity,
                                       size_t* written) {
  return guarded([&] {
    need(window, "window");
    const occult::FeatureVector f = window->channels == 1 ? occult::window_features(window->gray)
                                                          : occult::window_features(window->rgb);
    if (written) *written = f.size();
    if (out) std::copy_n(f.begin(), std::min(capacity, f.size()), out);
  });
}

OCC_API occ_status occ_model_train(const double* features, size_t rows, size_t dim, const int* labels,
                                   double learning_rate, int epochs, double l2, occ_model** out) {
  return guarded([&] {
    need(out, "out");
    if (rows > 0) {
      need(features, "features");
      need(labels, "labels");
    }
    std::vector<occult::FeatureVector> x(rows);
    for (std::size_t i = 0; i < rows; ++i) x[i].assign(features + i * dim, features + (i + 1) * dim);
    std::vector<int> y(labels, labels + rows);
    auto m = std::make_unique<occ_model>();
    m->model = occult::train_logistic(x, y, {learning_rate, epochs, l2});
    *out = m.release();
  });
}

OCC_API occ_status occ_model_predict(const occ_model* model, const double* features, size_t dim,
                                     double* score) {
  return guarded([&] {
    need(model, "model");
    need(features, "features");
    need(score, "score");
    if (dim != model->model.dim()) fail(ErrorCode::DimensionMismatch, "feature dimension differs from the model");
    *score = occult::predict(model->model, std::span<const double>(features, dim));
  });
}

OCC_API size_t occ_model_dim(const occ_model* model) { return model ? model->model.dim() : 0; }
OCC_API double occ_model_final_loss(const occ_model* model) { return model ? model->model.final_loss : 0.0; }

OCC_API occ_status occ_model_save(const occ_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    occult::save_model(model->model, str(path, "path"));
  });
}

OCC_API occ_status occ_model_load(const char* path, occ_model** out) {
  return guarded([&] {
    need(out, "out");
    *out = new occ_model{occult::load_model(str(path, "path"))};
  });
}

OCC_API void occ_model_free(occ_model* model) { delete model; }

OCC_API occ_status occ_score_case(const double* window_scores, size_t n, double* score) {
  return guarded([&] {
    need(score, "score");
    if (n > 0) need(window_scores, "window_scores");
    *score = occult::score_case(std::span<const double>(window_scores, n));
  });
}

OCC_API occ_status occ_roc_auc(const double* scores, const int* labels, size_t n, occ_roc* out) {
  return guarded([&] {
    need(out, "out");
    if (n > 0) {
      need(scores, "scores");
      need(labels, "labels");
    }
    const occult::RocResult r = occult::roc_auc({scores, n}, {labels, n});
    *out = {r.auc, r.variance, r.ci_lo, r.ci_hi};
  });
}

OCC_API occ_status occ_delong_compare(const double* scores_a, const double* scores_b, const int* labels,
                                      size_t n, occ_comparison* out) {
  return guarded([&] {
    need(out, "out");
    if (n > 0) {
      need(scores_a, "scores_a");
      need(scores_b, "scores_b");
      need(labels, "labels");
    }
    const occult::DelongComparison c = occult::delong_compare({scores_a, n}, {scores_b, n}, {labels, n});
    *out = {c.auc_a, c.auc_b, c.diff, c.variance, c.ci_lo, c.ci_hi, c.z, c.p_value};
  });
}

OCC_API occ_status occ_similarity(const occ_image* a, const occ_image* b, double* mse, double* correlation) {
  return guarded([&] {
    const occult::Similarity s = occult::similarity(gray_of(a, "a"), gray_of(b, "b"));
    if (mse) *mse = s.mse;
    if (correlation) *correlation = s.correlation;
  });
}

OCC_API occ_status occ_midpoint_threshold(const double* positive, size_t n_positive, const double* negative,
                                          size_t n_negative, double* threshold) {
  return guarded([&] {
    need(threshold, "threshold");
    if (n_positive > 0) need(positive, "positive");
    if (n_negative > 0) need(negative, "negative");
    *threshold = occult::midpoint_threshold({positive, n_positive}, {negative, n_negative});
  });
}

OCC_API occ_status occ_config_create(occ_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new occ_config;
  });
}

OCC_API occ_status occ_config_load(const char* path, occ_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new occ_config{occult::load_config(str(path, "path"))};
  });
}

OCC_API occ_status occ_config_set(occ_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    occult::set_config_value(config->config, str(key, "key"), str(value, "value"));
  });
}

OCC_API occ_status occ_config_get(const occ_config* config, const char* key, char* buf, size_t capacity,
                                  size_t* needed) {
  return guarded([&] {
    need(config, "config");
    copy_text(occult::get_config_value(config->config, str(key, "key")), buf, capacity, needed);
  });
}

OCC_API occ_status occ_config_validate(const occ_config* config) {
  return guarded([&] {
    need(config, "config");
    occult::validate(config->config);
  });
}

OCC_API occ_status occ_config_format(const occ_config* config, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    copy_text(occult::format_config(config->config), buf, capacity, needed);
  });
}

OCC_API void occ_config_free(occ_config* config) { delete config; }

OCC_API size_t occ_config_key_count(void) { return occult::config_keys().size(); }

OCC_API const char* occ_config_key_name(size_t index) {
  const auto& keys = occult::config_keys();
  return index < keys.size() ? keys[index].name.c_str() : nullptr;
}

OCC_API const char* occ_config_key_description(size_t index) {
  const auto& keys = occult::config_keys();
  return index < keys.size() ? keys[index].description.c_str() : nullptr;
}

OCC_API occ_status occ_run_experiment(const occ_config* config, occ_progress_fn progress, void* user,
                                      char* report, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    occult::ProgressFn fn;
    if (progress) fn = [progress, user](std::size_t done, std::size_t total) { progress(done, total, user); };
    const occult::ExperimentResult r = occult::run_experiment(config->config, fn);
    copy_text(occult::format_report(r.report), report, capacity, needed);
  });
}

OCC_API occ_status occ_stage_phantom(const occ_config* config, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_phantom(config->config, str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_preprocess(const occ_config* config, const char* in_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_preprocess(config->config, str(in_dir, "in_dir"), str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_simulate(const occ_config* config, const char* in_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_simulate(config->config, str(in_dir, "in_dir"), str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_rcdt(const occ_config* config, const char* in_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_rcdt(config->config, str(in_dir, "in_dir"), str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_fuse(const occ_config* config, const char* in_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_fuse(config->config, str(in_dir, "in_dir"), str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_train(const occ_config* config, const char* in_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_train(config->config, str(in_dir, "in_dir"), str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_score(const occ_config* config, const char* in_dir, const char* model_dir,
                                   const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    occult::stage_score(config->config, str(in_dir, "in_dir"), str(model_dir, "model_dir"),
                        str(out_dir, "out_dir"));
  });
}

OCC_API occ_status occ_stage_evaluate(const char* score_table, const char* out_dir, char* report,
                                      size_t capacity, size_t* needed) {
  return guarded([&] {
    const auto r = occult::stage_evaluate(str(score_table, "score_table"), str(out_dir, "out_dir"));
    copy_text(occult::format_auc_lines(r), report, capacity, needed);
  });
}

OCC_API occ_status occ_stage_compare(const char* score_table, const char* out_dir, char* report,
                                     size_t capacity, size_t* needed) {
  return guarded([&] {
    const auto r = occult::stage_compare(str(score_table, "score_table"), str(out_dir, "out_dir"));
    copy_text(occult::format_comparison_lines(r), report, capacity, needed);
  });
}

}  // extern "C"
