#include "audiox/latent_codec.hpp"

#include "audiox/io.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace audiox::codec {

namespace {

// QR factor (sign-normalised) of a fixed Gaussian 16x16 draw.
constexpr double kRotation[kFrameSize * kFrameSize] = {
    0.3287181453544499, -0.5385080966904872, 0.11070545969816907, -0.169918963117803, -0.17944173667426208, 0.22710665146645684, 0.22780311960567345, -0.3038279425820528, -0.06900881583354287, -0.002964858501411673, -0.17246177420653325, 0.19668959575101785, -0.0849017946291229, -0.3641912364501991, -0.30175548259163115, -0.1695346556975352,
    -0.009715198281623878, -0.038539590382121375, -0.05012693622763184, 0.1692564022701061, 0.21539964825668143, -0.2774011483796712, 0.7308881657569937, -0.022885911397715567, -0.304464886816167, -0.08077836552398328, 0.08197071761809074, -0.17292749929968773, 0.0535967558083644, -0.1931687598848822, 0.3561053398566459, -0.07965719534550016,
    -0.28482458737939176, -0.35513905007925406, 0.03386657039163906, 0.15839153742908932, 0.17837106097139485, -0.2110349376580025, -0.11437904537670913, -0.09314933078948175, 0.5589634377385249, 0.4230815840118405, -0.12751226894351592, -0.1423828081554425, 0.1272810310146123, -0.23119010748127106, 0.18693619518545387, -0.1893150276390621,
    -0.23389071268846956, -0.40045193143193925, -0.03516185784887244, 0.03748650448284552, -0.32777456860694565, -0.18063485592472212, -0.033956784279143885, 0.3429067675111316, -0.013833973955949005, -0.3170120333242149, -0.24918105166765367, 0.02763246709692831, -0.5073169218866996, 0.20319094120555817, 0.2298246775352535, -0.09202933977948168,
    0.4294868787114642, -0.07388888931880168, 0.3204576300596576, -0.2260557982822773, 0.2815517969832573, -0.4559732318694369, -0.16709611831689564, 0.11884000975307155, 0.0845093490872084, -0.321732632133135, -0.03876084277025967, -0.08627055869237296, 0.21872616120729513, 0.19063738832120722, -0.05925410414309275, -0.3460730385868837,
    0.1631239222922729, -0.07630322243918435, 0.04061675985591751, 0.4174363698461623, 0.3185556485158694, -0.06382721462774268, -0.23166933764720565, 0.4030732337975979, -0.14644135754311383, -0.04913544219087108, -0.021761187392155972, -0.12986913127776256, -0.21446589324103868, -0.46932711500178026, -0.29206932953006653, 0.2778637704447309,
    0.3369717974690517, 0.18242741903825146, -0.29217572594451424, -0.485772340955095, 0.08933306514595342, -0.020846617905021403, 0.04884122641265379, -0.006647747069430953, 0.3807946234756184, -0.026456698832517476, 0.0332067572608996, -0.17477273579043287, -0.4154223670959084, -0.2446769412132135, 0.2531543411512165, 0.2170295309561432,
    -0.08576207529811633, -0.10313610676196397, 0.06389468723568406, 0.055851378256113055, -0.38810458038229645, -0.3042917196550389, -0.10328619520479454, -0.12617639661704333, 0.16457451821405308, -0.31630788031963586, 0.6495981514467702, 0.13297586409555898, 0.14172725444389697, -0.2885211465405023, 0.01827885635821255, 0.18584347185005534,
    -0.2441729852542024, -0.016287601913965232, 0.5738672289980132, -0.09138401768047559, 0.17137274702067815, 0.3313675209699195, 0.05893539063137546, -0.12777690031081781, 0.15136594263838118, -0.4024275458029562, -0.21135452913354053, -0.1452772313029196, 0.09140167400421854, -0.07184198679486321, 0.18932245020713143, 0.3787769090528693,
    -0.2578198062803021, -0.10589410109980453, -0.01678022594642747, -0.18997130301314188, 0.33568111667111045, -0.3086956674409782, 0.310486280698772, -0.012278309533401423, 0.1618322498287899, 0.05764973309586629, 0.03905397199434651, 0.37672075369613756, -0.1502007002219576, 0.25370160655031865, -0.4490573906576194, 0.3462415297083469,
    0.38325338784447394, -0.24001866471612404, -0.009361586001471505, 0.03981712324655562, -0.1346657372292313, -0.09604536260151923, -0.02643041218643476, 0.18325603557120557, -0.05650478793961741, 0.24543447320014078, -0.18354243323041325, 0.2927811745294596, 0.3460282315586297, 0.13992106406006394, 0.3694951145045239, 0.5229859763693779,
    0.10217685131753945, -0.024325156870325652, 0.027165506831797262, 0.0393435886347486, -0.4048610045846003, -0.02096240790269362, 0.323327445858923, 0.2177655475124724, 0.24346082760519513, 0.07610609420897659, -0.05053905019364083, -0.6049580606553502, 0.17189431905565555, 0.1773466334815156, -0.3850813666030585, 0.16579222366131313,
    -0.13739810883668405, 0.24253158949485237, 0.32658807534968765, -0.23446001751671017, -0.262968626157023, -0.4766317367464692, -0.14591479033569743, -0.22812279014212633, -0.3518892408165667, 0.3028936348920944, -0.27357155139636113, -0.1251869993419414, -0.1502907906176304, -0.20940238414678503, -0.039320764710546144, 0.13015721111924128,
    0.0900036808931682, 0.21518372909522263, 0.548393255510762, -0.004392598684228247, -0.11410345594312479, 0.14210007395482796, 0.233811077217342, 0.4294130943695091, 0.1685056653420429, 0.3242578396468975, 0.24658741300193715, 0.28196958976151276, -0.21229238102255574, -0.05798413823398966, 0.08425149501385308, -0.20781614484602512,
    0.19932613980417638, -0.2869722070144736, 0.2219149361075669, 0.1597010858284922, 0.14383247461240042, 0.057489837370515814, -0.11269824436519009, -0.34359581914376075, -0.13846021450129437, 0.2298167756383956, 0.39989775084689727, -0.29400216928347195, -0.3786092142092918, 0.39931737736220774, 0.09883653444109698, 0.1322992434263969,
    -0.2718859789466508, -0.33118195901521436, -0.0445459517204762, -0.5687438097600827, 0.12585297748885788, 0.15445398618050646, -0.10608178683600394, 0.3692848638677863, -0.3259945927550298, 0.16214039718021556, 0.2865795459001691, -0.20371841851078432, 0.1965986217268302, -0.09149831366523976, 0.020208580835732834, -0.0008001686809645174,};

}  // namespace

const Mat<double>& rotation() {
  static const Mat<double> q = Eigen::Map<const Mat<double>>(kRotation, kFrameSize, kFrameSize);
  return q;
}

LatentSeq encode(const synth::Waveform& w) {
  if (w.samples.size() == 0 || w.samples.size() % kFrameSize != 0)
    throw std::invalid_argument("encode: waveform length " + std::to_string(w.samples.size()) +
                                " is not a positive multiple of the frame size 16");
  const Index frames = w.samples.size() / kFrameSize;
  Eigen::Map<const Mat<double>> framed(w.samples.data(), frames, kFrameSize);
  LatentSeq z;
  z.data = framed * rotation().transpose();
  z.frame_rate = w.sample_rate / kFrameSize;
  return z;
}

synth::Waveform decode(const LatentSeq& z) {
  if (z.channels() != kChannels) throw std::invalid_argument("decode: latent must have 16 channels");
  Mat<double> framed = z.data * rotation();
  synth::Waveform w;
  w.sample_rate = z.frame_rate * kFrameSize;
  w.samples = Eigen::Map<const Eigen::VectorXd>(framed.data(), framed.size());
  return w;
}

std::vector<std::uint8_t> latent_bytes(const LatentSeq& z) {
  std::vector<std::uint8_t> out{'A', 'X', 'L', 'T'};
  io::put_u32(out, static_cast<std::uint32_t>(z.frames()));
  io::put_u32(out, static_cast<std::uint32_t>(z.channels()));
  io::put_u32(out, static_cast<std::uint32_t>(z.frame_rate));
  for (Index i = 0; i < z.data.size(); ++i) io::put_f32(out, static_cast<float>(z.data.data()[i]));
  return out;
}

LatentSeq latent_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "AXLT", 4) != 0) throw std::runtime_error("not a latent file");
  const auto frames = io::get_u32(bytes.data() + 4);
  const auto channels = io::get_u32(bytes.data() + 8);
  LatentSeq z;
  z.frame_rate = static_cast<int>(io::get_u32(bytes.data() + 12));
  if (bytes.size() != 16 + 4ull * frames * channels) throw std::runtime_error("latent file size mismatch");
  z.data.resize(frames, channels);
  for (Index i = 0; i < z.data.size(); ++i) z.data.data()[i] = io::get_f32(bytes.data() + 16 + 4 * i);
  return z;
}

void write_latent(const std::filesystem::path& path, const LatentSeq& z) { io::write_bytes(path, latent_bytes(z)); }

LatentSeq read_latent(const std::filesystem::path& path) { return latent_from_bytes(io::read_bytes(path)); }

}  // namespace audiox::codec
